#pragma once

#include <cstdint>
#include <vector>

#include "setrank/core.hpp"
#include "setrank/oracle.hpp"

namespace setrank {

// Result of one rerank: top-min(k,n) ranking with synthetic descending
// scores k..1, the per-query cost ledger, and (setwise_insertion only) the
// number of candidates promoted into the sorted buffer.
struct RerankOutcome {
    Ranking ranking;
    CostLedger ledger;
    std::uint64_t promotions = 0;
};

// All rerankers are pure procedures over an oracle: (query, docs in
// first-stage order, config, oracle) -> outcome. Each call is strictly
// sequential internally; callers parallelize across queries.

/// One score_one call per document (n calls); top-k by score, ties by
/// presentation order.
RerankOutcome pointwise_rerank(const Query& query,
                               const std::vector<const Document*>& docs,
                               std::size_t k, Oracle& oracle);

/// Every pair compared once (n(n-1)/2 calls); score = win count, ties by
/// prior (presentation) order.
RerankOutcome pairwise_allpair(const Query& query,
                               const std::vector<const Document*>& docs,
                               std::size_t k, Oracle& oracle);

/// Tournament max-heap top-k. set_size c is documents-per-call: for c >= 3
/// each node has c-1 children and one sift step is a single arity-c call
/// over parent + children; c = 2 is the pairwise special case (binary heap,
/// child-vs-child then winner-vs-parent). use_prior presents the parent
/// first and flags the call prior-ordered.
RerankOutcome heapsort_rerank(const Query& query,
                              const std::vector<const Document*>& docs,
                              std::size_t k, std::size_t set_size,
                              bool use_prior, Oracle& oracle);

/// k bubble passes with a window of c documents sliding bottom-to-top, one
/// call per placement, winner carried into the next window. Pass i settles
/// position i. With early_exit, a swap-free pass ends the run.
RerankOutcome bubblesort_rerank(const Query& query,
                                const std::vector<const Document*>& docs,
                                std::size_t k, std::size_t set_size,
                                bool use_prior, bool early_exit, Oracle& oracle);

/// r sliding-window passes of width w and step s, bottom-to-top, one
/// rank_set call per placement (floor((n-w)/s)+1 per pass).
RerankOutcome listwise_rerank(const Query& query,
                              const std::vector<const Document*>& docs,
                              std::size_t k, std::size_t window, std::size_t step,
                              std::size_t passes, Oracle& oracle);

/// Setwise Insertion: sorts the first k docs with the setwise heap, then
/// scans the remaining candidates in sets of c-1 against the buffer's
/// weakest element (pivot at position 0). Winning candidates are promoted by
/// a bottom-up chunk walk through the buffer; max_compare uses select_best
/// calls with in-chunk refinement, sort_compare places in one rank_set call
/// per chunk (requires an oracle that advertises weights).
RerankOutcome setwise_insertion(const Query& query,
                                const std::vector<const Document*>& docs,
                                std::size_t k, std::size_t set_size,
                                CompareMode compare_mode, bool use_prior,
                                Oracle& oracle);

/// Dispatch by cfg.method (pairwise sorts force set_size 2). Validates the
/// config against the pool size and fills ledger.wall_clock_ms.
RerankOutcome rerank(const Query& query,
                     const std::vector<const Document*>& docs,
                     const AlgorithmConfig& cfg, Oracle& oracle);

}  // namespace setrank
