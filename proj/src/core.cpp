#include "setrank/core.hpp"

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace setrank {

std::uint64_t whitespace_tokens(const std::string& text) {
    std::uint64_t count = 0;
    bool in_token = false;
    for (unsigned char ch : text) {
        if (std::isspace(ch)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

Document make_document(std::string doc_id, std::string text, double prior_score) {
    Document d;
    d.token_estimate = whitespace_tokens(text);
    d.doc_id = std::move(doc_id);
    d.text = std::move(text);
    d.prior_score = prior_score;
    return d;
}

Ranking validate_ranking(Ranking r) {
    std::vector<const std::string*> seen;
    seen.reserve(r.entries.size());
    for (const auto& e : r.entries) seen.push_back(&e.doc_id);
    std::sort(seen.begin(), seen.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    for (std::size_t i = 1; i < seen.size(); ++i) {
        if (*seen[i] == *seen[i - 1]) throw DuplicateDocError(*seen[i]);
    }
    for (std::size_t i = 1; i < r.entries.size(); ++i) {
        if (r.entries[i].score > r.entries[i - 1].score)
            throw NonMonotoneScoresError(i);
    }
    return r;
}

Ranking ranking_from_scores(std::string query_id,
                            std::vector<std::pair<std::string, double>> scored) {
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Ranking r;
    r.query_id = std::move(query_id);
    r.entries.reserve(scored.size());
    for (auto& [id, score] : scored) r.entries.push_back({std::move(id), score});
    return validate_ranking(std::move(r));
}

void Qrels::add(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0)
        throw Error(ErrorKind::Data, "negative relevance grade for " + query_id +
                                         "/" + doc_id);
    judgments_[query_id][doc_id] = grade;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
    auto q = judgments_.find(query_id);
    if (q == judgments_.end()) return 0;
    auto d = q->second.find(doc_id);
    return d == q->second.end() ? 0 : d->second;
}

bool Qrels::has_query(const std::string& query_id) const {
    return judgments_.count(query_id) > 0;
}

CostLedger& CostLedger::operator+=(const CostLedger& other) {
    calls_select_best += other.calls_select_best;
    calls_rank_set += other.calls_rank_set;
    calls_score += other.calls_score;
    total_docs_in_calls += other.total_docs_in_calls;
    prompt_tokens += other.prompt_tokens;
    output_tokens += other.output_tokens;
    wall_clock_ms += other.wall_clock_ms;
    return *this;
}

std::string method_name(Method m) {
    switch (m) {
        case Method::pointwise_score: return "pointwise_score";
        case Method::pairwise_allpair: return "pairwise_allpair";
        case Method::pairwise_heapsort: return "pairwise_heapsort";
        case Method::pairwise_bubblesort: return "pairwise_bubblesort";
        case Method::listwise_window: return "listwise_window";
        case Method::setwise_heapsort: return "setwise_heapsort";
        case Method::setwise_bubblesort: return "setwise_bubblesort";
        case Method::setwise_insertion: return "setwise_insertion";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    static const std::map<std::string, Method> table = {
        {"pointwise_score", Method::pointwise_score},
        {"pairwise_allpair", Method::pairwise_allpair},
        {"pairwise_heapsort", Method::pairwise_heapsort},
        {"pairwise_bubblesort", Method::pairwise_bubblesort},
        {"listwise_window", Method::listwise_window},
        {"setwise_heapsort", Method::setwise_heapsort},
        {"setwise_bubblesort", Method::setwise_bubblesort},
        {"setwise_insertion", Method::setwise_insertion},
    };
    auto it = table.find(name);
    if (it == table.end())
        throw Error(ErrorKind::Config, "unknown method '" + name + "'");
    return it->second;
}

std::string compare_mode_name(CompareMode m) {
    return m == CompareMode::max_compare ? "max" : "sort";
}

CompareMode parse_compare_mode(const std::string& name) {
    if (name == "max" || name == "max_compare") return CompareMode::max_compare;
    if (name == "sort" || name == "sort_compare") return CompareMode::sort_compare;
    throw Error(ErrorKind::Config, "unknown compare mode '" + name + "'");
}

void validate_config(const AlgorithmConfig& cfg, std::size_t n_docs) {
    if (cfg.k == 0) throw Error(ErrorKind::Config, "k must be positive");
    if (cfg.k > n_docs)
        throw Error(ErrorKind::Config,
                    "k=" + std::to_string(cfg.k) + " exceeds candidate pool of " +
                        std::to_string(n_docs));
    if (cfg.set_size < 2) throw Error(ErrorKind::Config, "set_size must be >= 2");
    if (cfg.method == Method::listwise_window) {
        if (cfg.window == 0 || cfg.step == 0 || cfg.passes == 0)
            throw Error(ErrorKind::Config, "listwise window/step/passes must be positive");
        if (cfg.step > cfg.window)
            throw Error(ErrorKind::Config, "listwise step must not exceed window");
    }
}

// --- file formats -----------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Data, "cannot open '" + path + "'");
    return in;
}

}  // namespace

std::map<std::string, Ranking> read_trec_run(const std::string& path) {
    auto in = open_input(path);
    std::map<std::string, std::vector<std::pair<std::string, double>>> raw;
    std::vector<std::string> order;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_ws(line);
        if (f.size() != 6)
            throw Error(ErrorKind::Data, path + ":" + std::to_string(lineno) +
                                             ": expected 6 run-file fields, got " +
                                             std::to_string(f.size()));
        double score;
        try {
            score = std::stod(f[4]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Data, path + ":" + std::to_string(lineno) +
                                             ": bad score '" + f[4] + "'");
        }
        if (!raw.count(f[0])) order.push_back(f[0]);
        raw[f[0]].emplace_back(f[2], score);
    }
    std::map<std::string, Ranking> out;
    for (const auto& qid : order) {
        Ranking r;
        r.query_id = qid;
        for (auto& [id, score] : raw[qid]) r.entries.push_back({id, score});
        out[qid] = validate_ranking(std::move(r));
    }
    return out;
}

void write_trec_run(const std::string& path,
                    const std::map<std::string, Ranking>& rankings,
                    const std::string& tag) {
    std::ostringstream os;
    char buf[64];
    for (const auto& [qid, ranking] : rankings) {
        std::size_t rank = 1;
        for (const auto& e : ranking.entries) {
            std::snprintf(buf, sizeof(buf), "%.6f", e.score);
            os << qid << " Q0 " << e.doc_id << ' ' << rank++ << ' ' << buf << ' '
               << tag << '\n';
        }
    }
    atomic_write(path, os.str());
}

Qrels read_qrels(const std::string& path) {
    auto in = open_input(path);
    Qrels qrels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_ws(line);
        if (f.size() != 4)
            throw Error(ErrorKind::Data, path + ":" + std::to_string(lineno) +
                                             ": expected 4 qrels fields");
        int grade;
        try {
            grade = std::stoi(f[3]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Data, path + ":" + std::to_string(lineno) +
                                             ": bad grade '" + f[3] + "'");
        }
        if (grade < 0)
            throw Error(ErrorKind::Data, path + ":" + std::to_string(lineno) +
                                             ": negative grade");
        qrels.add(f[0], f[2], grade);
    }
    return qrels;
}

void write_qrels(const std::string& path, const Qrels& qrels) {
    std::ostringstream os;
    for (const auto& [qid, docs] : qrels.judgments())
        for (const auto& [docid, grade] : docs)
            os << qid << " 0 " << docid << ' ' << grade << '\n';
    atomic_write(path, os.str());
}

std::map<std::string, Document> read_corpus_jsonl(const std::string& path) {
    auto in = open_input(path);
    std::map<std::string, Document> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Data,
                        path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("doc_id") || !j.contains("text"))
            throw Error(ErrorKind::Data, path + ":" + std::to_string(lineno) +
                                             ": missing doc_id/text");
        auto doc = make_document(j["doc_id"].get<std::string>(),
                                 j["text"].get<std::string>(), 0.0);
        out[doc.doc_id] = std::move(doc);
    }
    return out;
}

void write_corpus_jsonl(const std::string& path,
                        const std::vector<Document>& docs) {
    std::ostringstream os;
    for (const auto& d : docs) {
        nlohmann::json j{{"doc_id", d.doc_id}, {"text", d.text}};
        os << j.dump() << '\n';
    }
    atomic_write(path, os.str());
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error(ErrorKind::Data, "write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& salt) {
    // splitmix64 over the seed folded with a FNV-1a hash of the salt
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : salt) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace setrank
