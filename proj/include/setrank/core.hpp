#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace setrank {

// Error taxonomy. The kind maps onto CLI exit codes: Config -> 2,
// Data/Parse -> 3, Oracle/Transport/Capability -> 4.
enum class ErrorKind { Config, Data, Parse, Oracle, Transport, Capability };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct DuplicateDocError : Error {
    explicit DuplicateDocError(std::string id)
        : Error(ErrorKind::Data, "duplicate doc_id '" + id + "' in ranking"),
          doc_id(std::move(id)) {}
    std::string doc_id;
};

struct NonMonotoneScoresError : Error {
    explicit NonMonotoneScoresError(std::size_t pos)
        : Error(ErrorKind::Data,
                "ranking scores increase at position " + std::to_string(pos)),
          position(pos) {}
    std::size_t position;
};

struct UnknownQueryError : Error {
    explicit UnknownQueryError(std::string qid)
        : Error(ErrorKind::Data, "query '" + qid + "' not present in qrels"),
          query_id(std::move(qid)) {}
    std::string query_id;
};

struct DocSetMismatchError : Error {
    DocSetMismatchError()
        : Error(ErrorKind::Data, "rankings do not cover the same doc_id set") {}
};

struct UnsupportedCapabilityError : Error {
    explicit UnsupportedCapabilityError(const std::string& kind)
        : Error(ErrorKind::Capability,
                "oracle does not support call kind '" + kind + "'") {}
};

struct MalformedResponseError : Error {
    explicit MalformedResponseError(std::string response)
        : Error(ErrorKind::Oracle, "could not parse oracle response: '" +
                                       response + "'"),
          raw(std::move(response)) {}
    std::string raw;
};

struct TransportError : Error {
    explicit TransportError(const std::string& detail)
        : Error(ErrorKind::Transport, "endpoint transport failure: " + detail) {}
};

struct ArityMismatchError : Error {
    explicit ArityMismatchError(const std::string& detail)
        : Error(ErrorKind::Oracle, "arity mismatch: " + detail) {}
};

struct NoConvergenceError : Error {
    explicit NoConvergenceError(const std::string& detail)
        : Error(ErrorKind::Config, "calibration did not converge: " + detail) {}
};

/// Number of whitespace-separated tokens in a string. This is the artifact's
/// model-agnostic token estimate: proportional to, not identical with, any
/// specific model tokenizer's count.
std::uint64_t whitespace_tokens(const std::string& text);

// The unit being ranked: identifier, passage text (may be empty in
// simulation mode), first-stage retriever score, and a token estimate.
struct Document {
    std::string doc_id;
    std::string text;
    double prior_score = 0.0;
    std::uint64_t token_estimate = 0;
};

/// Builds a Document with token_estimate derived from `text`.
Document make_document(std::string doc_id, std::string text, double prior_score);

struct Query {
    std::string query_id;
    std::string text;
};

struct RankEntry {
    std::string doc_id;
    double score = 0.0;
};

// An ordered list of (doc_id, score), descending by score with ties broken
// by doc_id ascending.
struct Ranking {
    std::string query_id;
    std::vector<RankEntry> entries;
};

/// Returns `r` unchanged iff all Ranking invariants hold; throws
/// DuplicateDocError or NonMonotoneScoresError otherwise.
Ranking validate_ranking(Ranking r);

/// Builds a valid Ranking from unordered (doc_id, score) pairs: sorts by
/// score descending, ties by doc_id ascending.
Ranking ranking_from_scores(std::string query_id,
                            std::vector<std::pair<std::string, double>> scored);

// Graded relevance judgments: query -> doc -> grade. Unknown pairs read as 0.
class Qrels {
public:
    void add(const std::string& query_id, const std::string& doc_id, int grade);
    int grade(const std::string& query_id, const std::string& doc_id) const;
    bool has_query(const std::string& query_id) const;
    const std::map<std::string, std::map<std::string, int>>& judgments() const {
        return judgments_;
    }

private:
    std::map<std::string, std::map<std::string, int>> judgments_;
};

// Exact oracle-call and token cost accounting for one query (or, after
// merging, a whole run). All counts are monotonically non-decreasing.
struct CostLedger {
    std::uint64_t calls_select_best = 0;
    std::uint64_t calls_rank_set = 0;
    std::uint64_t calls_score = 0;
    std::uint64_t total_docs_in_calls = 0;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t output_tokens = 0;
    double wall_clock_ms = 0.0;

    std::uint64_t total_calls() const {
        return calls_select_best + calls_rank_set + calls_score;
    }

    CostLedger& operator+=(const CostLedger& other);
    friend CostLedger operator+(CostLedger a, const CostLedger& b) {
        a += b;
        return a;
    }
    bool operator==(const CostLedger& other) const = default;
};

enum class Method {
    pointwise_score,
    pairwise_allpair,
    pairwise_heapsort,
    pairwise_bubblesort,
    listwise_window,
    setwise_heapsort,
    setwise_bubblesort,
    setwise_insertion,
};

enum class CompareMode { max_compare, sort_compare };

std::string method_name(Method m);
Method parse_method(const std::string& name);  // throws Error(Config)
std::string compare_mode_name(CompareMode m);
CompareMode parse_compare_mode(const std::string& name);

struct AlgorithmConfig {
    Method method = Method::setwise_heapsort;
    std::size_t k = 10;
    std::size_t set_size = 3;  // documents per oracle call; 2 for pairwise
    std::size_t window = 4;    // listwise only
    std::size_t step = 2;
    std::size_t passes = 5;
    bool use_prior = false;
    CompareMode compare_mode = CompareMode::max_compare;
    bool bubble_early_exit = true;
    std::uint64_t rng_seed = 42;
};

/// Throws Error(Config) on invalid field combinations (k == 0, c < 2, s > w...).
void validate_config(const AlgorithmConfig& cfg, std::size_t n_docs);

// --- TREC / JSONL file interfaces -----------------------------------------

/// Reads a TREC run file (`qid Q0 docid rank score tag`); rankings are
/// validated. Throws Error(Data) with a line number on parse failures.
std::map<std::string, Ranking> read_trec_run(const std::string& path);

/// Writes rankings as a TREC run file, rank starting at 1.
void write_trec_run(const std::string& path,
                    const std::map<std::string, Ranking>& rankings,
                    const std::string& tag);

/// Reads a TREC qrels file (`qid 0 docid grade`).
Qrels read_qrels(const std::string& path);
void write_qrels(const std::string& path, const Qrels& qrels);

/// Reads a JSON Lines corpus, one object per line: {"doc_id": ..., "text": ...}.
/// Returned documents carry prior_score 0; the run file supplies priors.
std::map<std::string, Document> read_corpus_jsonl(const std::string& path);
void write_corpus_jsonl(const std::string& path,
                        const std::vector<Document>& docs);

/// Writes `content` to `path` atomically (temp file + rename).
void atomic_write(const std::string& path, const std::string& content);

/// 64-bit seed mixing for per-query RNG substreams.
std::uint64_t mix_seed(std::uint64_t seed, const std::string& salt);

}  // namespace setrank
