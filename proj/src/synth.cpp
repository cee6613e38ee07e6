#include "setrank/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "setrank/eval.hpp"

namespace setrank {

namespace {

std::vector<double> default_fractions(int levels) {
    if (levels == 4) return {0.55, 0.20, 0.15, 0.10};
    return std::vector<double>(static_cast<std::size_t>(levels),
                               1.0 / static_cast<double>(levels));
}

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.n_queries == 0 || cfg.n_docs == 0)
        throw Error(ErrorKind::Config, "synth world needs queries and docs");
    if (cfg.grade_levels < 1)
        throw Error(ErrorKind::Config, "grade_levels must be >= 1");
    if (cfg.initial_noise < 0.0)
        throw Error(ErrorKind::Config, "initial_noise must be >= 0");
    if (!cfg.grade_fractions.empty()) {
        if (cfg.grade_fractions.size() != static_cast<std::size_t>(cfg.grade_levels))
            throw Error(ErrorKind::Config, "grade_fractions size != grade_levels");
        double sum = 0.0;
        for (double f : cfg.grade_fractions) {
            if (f < 0.0 || f > 1.0)
                throw Error(ErrorKind::Config, "grade fraction outside [0,1]");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw Error(ErrorKind::Config, "grade_fractions must sum to 1");
    }
}

SynthWorld generate(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    const auto fractions = cfg.grade_fractions.empty()
                               ? default_fractions(cfg.grade_levels)
                               : cfg.grade_fractions;

    std::string filler;
    for (std::size_t t = 0; t < cfg.doc_tokens; ++t) {
        if (t) filler += ' ';
        filler += "w" + std::to_string(t);
    }

    SynthWorld world;
    char buf[32];
    for (std::size_t q = 0; q < cfg.n_queries; ++q) {
        std::snprintf(buf, sizeof(buf), "q%04zu", q);
        const std::string qid = buf;
        world.queries.push_back({qid, "synthetic query " + std::to_string(q)});

        std::mt19937_64 rng(mix_seed(cfg.rng_seed, qid));
        std::discrete_distribution<int> grade_dist(fractions.begin(), fractions.end());
        std::normal_distribution<double> noise(0.0, 1.0);

        std::vector<std::pair<std::string, double>> first_stage;
        std::vector<std::pair<std::string, double>> true_order;
        std::map<std::string, Document> pool;
        for (std::size_t d = 0; d < cfg.n_docs; ++d) {
            std::snprintf(buf, sizeof(buf), "d%05zu", d);
            const std::string docid = qid + "_" + buf;  // query-scoped ids
            const int grade = grade_dist(rng);
            const double score =
                static_cast<double>(grade) +
                (cfg.initial_noise > 0.0 ? cfg.initial_noise * noise(rng) : 0.0);
            world.qrels.add(qid, docid, grade);
            first_stage.emplace_back(docid, score);
            true_order.emplace_back(docid, static_cast<double>(grade));
            pool[docid] = make_document(docid, filler, score);
        }
        world.initial[qid] = ranking_from_scores(qid, std::move(first_stage));
        world.truth[qid] = ranking_from_scores(qid, std::move(true_order));

        // prior_score mirrors the first-stage score; docs stored in
        // first-stage order
        auto& docs = world.docs[qid];
        docs.reserve(cfg.n_docs);
        for (const auto& e : world.initial[qid].entries) {
            auto doc = pool[e.doc_id];
            doc.prior_score = e.score;
            docs.push_back(std::move(doc));
        }
    }
    return world;
}

double mean_tau_to_truth(const SynthWorld& world) {
    double sum = 0.0;
    for (const auto& [qid, initial] : world.initial)
        sum += kendall_tau(initial, world.truth.at(qid));
    return sum / static_cast<double>(world.initial.size());
}

double tau_target_calibrate(double target_tau, SynthConfig cfg) {
    if (!(target_tau > 0.0) || target_tau > 1.0)
        throw Error(ErrorKind::Config, "target tau must lie in (0, 1]");
    cfg.n_queries = 50;
    constexpr double kTol = 0.03;

    auto measure = [&](double sigma) {
        cfg.initial_noise = sigma;
        return mean_tau_to_truth(generate(cfg));
    };

    if (target_tau >= 1.0 - kTol) return 0.0;  // noise-free boundary

    double lo = 0.0, hi = 1.0;
    double tau_hi = measure(hi);
    int expansions = 0;
    while (tau_hi > target_tau) {
        hi *= 2.0;
        tau_hi = measure(hi);
        if (++expansions > 30)
            throw NoConvergenceError("tau stays above target even at sigma=" +
                                     std::to_string(hi));
    }
    if (measure(lo) < target_tau - kTol)
        throw NoConvergenceError("tau at sigma=0 is already below target");

    for (int step = 0; step < 40; ++step) {
        const double mid = 0.5 * (lo + hi);
        const double tau = measure(mid);
        if (std::abs(tau - target_tau) <= kTol) return mid;
        if (tau > target_tau)
            lo = mid;
        else
            hi = mid;
    }
    throw NoConvergenceError("target tau " + std::to_string(target_tau) +
                             " not reached within 40 bisection steps");
}

void write_world(const SynthWorld& world, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_trec_run((fs::path(out_dir) / "run.txt").string(), world.initial,
                   "first_stage");
    write_qrels((fs::path(out_dir) / "qrels.txt").string(), world.qrels);

    std::vector<Document> all_docs;
    std::ostringstream queries;
    for (const auto& q : world.queries) {
        queries << q.query_id << '\t' << q.text << '\n';
        for (const auto& d : world.docs.at(q.query_id)) all_docs.push_back(d);
    }
    write_corpus_jsonl((fs::path(out_dir) / "corpus.jsonl").string(), all_docs);
    atomic_write((fs::path(out_dir) / "queries.tsv").string(), queries.str());
}

}  // namespace setrank
