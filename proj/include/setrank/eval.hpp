#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "setrank/core.hpp"

namespace setrank {

/// NDCG@k with trec_eval conventions: gain 2^grade - 1, discount
/// log2(rank+1), IDCG over the ideal ordering of all judged docs for the
/// query. Returns 0 when IDCG is 0; throws UnknownQueryError when qrels
/// lacks the query.
double ndcg_at_k(const Ranking& ranking, const Qrels& qrels, std::size_t k);

/// Kendall rank correlation in [-1,1], 1 - 2*inversions/C(m,2), counted by
/// merge sort. Both rankings must cover the same doc_id set.
double kendall_tau(const Ranking& a, const Ranking& b);

/// Inversion count of an integer sequence (O(m log m) merge procedure).
std::uint64_t count_inversions(std::vector<std::size_t> sequence);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    double ci_half_width = 0.0;  // t-based 95% CI; 0 when n < 2
    std::size_t count = 0;
};

/// Mean, sample std-dev, and t-distribution 95% CI half-width.
Aggregate aggregate_values(const std::vector<double>& values);

// Per-query metric values plus their aggregates for one (method, config).
struct MetricReport {
    std::string method;
    std::string config_fingerprint;
    // metric -> query_id -> value; map keys give deterministic row order
    std::map<std::string, std::map<std::string, double>> per_query;
    std::map<std::string, Aggregate> aggregates;

    void finalize();  // recomputes aggregates from per_query
};

/// Serializes a report as `method,query_id,metric,value` rows plus one
/// aggregate row per metric (query_id = "ALL").
std::string metric_report_csv(const MetricReport& report);

/// FNV-1a fingerprint of a config's canonical text form.
std::string config_fingerprint(const AlgorithmConfig& cfg);

}  // namespace setrank
