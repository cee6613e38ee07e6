#include "setrank/algorithms.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <deque>
#include <numeric>

namespace setrank {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

RerankOutcome make_outcome(const Query& query,
                           const std::vector<const Document*>& docs,
                           const std::vector<std::size_t>& order, std::size_t k,
                           CostLedger ledger, std::uint64_t promotions,
                           Clock::time_point t0) {
    const std::size_t m = std::min(k, order.size());
    RerankOutcome out;
    out.ranking.query_id = query.query_id;
    out.ranking.entries.reserve(m);
    for (std::size_t i = 0; i < m; ++i)
        out.ranking.entries.push_back(
            {docs[order[i]]->doc_id, static_cast<double>(m - i)});
    ledger.wall_clock_ms = elapsed_ms(t0);
    out.ledger = ledger;
    out.promotions = promotions;
    return out;
}

// Issues one call over the docs at `positions` (presentation order as given).
class Caller {
public:
    Caller(const Query& query, const std::vector<const Document*>& docs,
           Oracle& oracle, bool use_prior)
        : query_(query), docs_(docs), oracle_(oracle), use_prior_(use_prior) {}

    std::size_t select(const std::vector<std::size_t>& positions) {
        auto v = oracle_.invoke(request(positions, CallKind::select_best));
        return *v.winner;
    }

    OracleVerdict rank(const std::vector<std::size_t>& positions) {
        return oracle_.invoke(request(positions, CallKind::rank_set));
    }

    double score(std::size_t position) {
        auto v = oracle_.invoke(request({position}, CallKind::score_one));
        return *v.score;
    }

    bool use_prior() const { return use_prior_; }

private:
    OracleRequest request(const std::vector<std::size_t>& positions,
                          CallKind kind) const {
        OracleRequest req;
        req.query = &query_;
        req.kind = kind;
        req.prior_ordered = use_prior_ && kind != CallKind::score_one;
        req.docs.reserve(positions.size());
        for (std::size_t p : positions) req.docs.push_back(docs_[p]);
        return req;
    }

    const Query& query_;
    const std::vector<const Document*>& docs_;
    Oracle& oracle_;
    bool use_prior_;
};

std::vector<std::size_t> iota_order(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// Tournament max-heap over `items` (doc positions, initial order preserved
// as heap layout). Children per node = max(2, c-1); one arity-c call per
// sift step for c >= 3, pairwise tournament calls for c = 2. Returns the
// first `extract` items in descending relevance order.
std::vector<std::size_t> heap_extract_top(std::vector<std::size_t> heap,
                                          std::size_t extract, std::size_t c,
                                          Caller& call) {
    const std::size_t d = c == 2 ? 2 : c - 1;
    std::size_t size = heap.size();

    auto sift_down = [&](std::size_t i) {
        while (true) {
            const std::size_t first_child = d * i + 1;
            if (first_child >= size) break;
            const std::size_t last_child = std::min(size - 1, d * i + d);
            std::size_t winner_child;
            if (c == 2) {
                // find the best child pairwise, then challenge the parent
                std::size_t best = first_child;
                for (std::size_t j = first_child + 1; j <= last_child; ++j)
                    if (call.select({heap[best], heap[j]}) == 1) best = j;
                if (call.select({heap[i], heap[best]}) == 0) break;
                winner_child = best;
            } else {
                std::vector<std::size_t> members{heap[i]};
                for (std::size_t j = first_child; j <= last_child; ++j)
                    members.push_back(heap[j]);
                const std::size_t w = call.select(members);
                if (w == 0) break;
                winner_child = first_child + (w - 1);
            }
            std::swap(heap[i], heap[winner_child]);
            i = winner_child;
        }
    };

    if (size >= 2)
        for (std::size_t i = (size - 2) / d;; --i) {  // Floyd bottom-up build
            sift_down(i);
            if (i == 0) break;
        }

    std::vector<std::size_t> out;
    out.reserve(extract);
    for (std::size_t e = 0; e < extract && size > 0; ++e) {
        out.push_back(heap[0]);
        heap[0] = heap[size - 1];
        --size;
        if (size > 1) sift_down(0);
    }
    return out;
}

}  // namespace

RerankOutcome pointwise_rerank(const Query& query,
                               const std::vector<const Document*>& docs,
                               std::size_t k, Oracle& oracle) {
    const auto t0 = Clock::now();
    CostLedger ledger;
    RecordingOracle rec(oracle, ledger);
    Caller call(query, docs, rec, false);

    std::vector<double> scores(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        try {
            scores[i] = call.score(i);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(e.what()) + " (scoring doc '" +
                                      docs[i]->doc_id + "')");
        }
    }
    auto order = iota_order(docs.size());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    return make_outcome(query, docs, order, k, ledger, 0, t0);
}

RerankOutcome pairwise_allpair(const Query& query,
                               const std::vector<const Document*>& docs,
                               std::size_t k, Oracle& oracle) {
    const auto t0 = Clock::now();
    CostLedger ledger;
    RecordingOracle rec(oracle, ledger);
    Caller call(query, docs, rec, false);

    std::vector<std::size_t> wins(docs.size(), 0);
    for (std::size_t i = 0; i + 1 < docs.size(); ++i)
        for (std::size_t j = i + 1; j < docs.size(); ++j)
            ++wins[call.select({i, j}) == 0 ? i : j];

    auto order = iota_order(docs.size());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return wins[a] > wins[b];
    });
    return make_outcome(query, docs, order, k, ledger, 0, t0);
}

RerankOutcome heapsort_rerank(const Query& query,
                              const std::vector<const Document*>& docs,
                              std::size_t k, std::size_t set_size,
                              bool use_prior, Oracle& oracle) {
    const auto t0 = Clock::now();
    CostLedger ledger;
    RecordingOracle rec(oracle, ledger);
    Caller call(query, docs, rec, use_prior);

    auto order = heap_extract_top(iota_order(docs.size()),
                                  std::min(k, docs.size()), set_size, call);
    return make_outcome(query, docs, order, k, ledger, 0, t0);
}

RerankOutcome bubblesort_rerank(const Query& query,
                                const std::vector<const Document*>& docs,
                                std::size_t k, std::size_t set_size,
                                bool use_prior, bool early_exit, Oracle& oracle) {
    const auto t0 = Clock::now();
    CostLedger ledger;
    RecordingOracle rec(oracle, ledger);
    Caller call(query, docs, rec, use_prior);

    const std::size_t n = docs.size();
    const std::size_t c = set_size;
    auto order = iota_order(n);

    for (std::size_t pass = 0; pass < std::min(k, n); ++pass) {
        bool swapped = false;
        std::size_t hi = n == 0 ? 0 : n - 1;
        while (hi > pass) {
            const std::size_t lo = hi >= pass + (c - 1) ? hi - (c - 1) : pass;
            std::vector<std::size_t> window(order.begin() + lo,
                                            order.begin() + hi + 1);
            const std::size_t w = call.select(window);
            if (w != 0) {
                // move the winner to the window's top end, shifting the rest
                std::rotate(order.begin() + lo, order.begin() + lo + w,
                            order.begin() + lo + w + 1);
                swapped = true;
            }
            hi = lo;  // winner carried into the next placement
        }
        if (early_exit && !swapped) break;
    }
    return make_outcome(query, docs, order, k, ledger, 0, t0);
}

RerankOutcome listwise_rerank(const Query& query,
                              const std::vector<const Document*>& docs,
                              std::size_t k, std::size_t window, std::size_t step,
                              std::size_t passes, Oracle& oracle) {
    const auto t0 = Clock::now();
    CostLedger ledger;
    RecordingOracle rec(oracle, ledger);
    Caller call(query, docs, rec, false);

    const std::size_t n = docs.size();
    auto order = iota_order(n);
    const std::size_t w = std::min(window, n);

    if (n >= 2) {
        const std::size_t placements = (n - w) / step + 1;
        for (std::size_t pass = 0; pass < passes; ++pass) {
            for (std::size_t j = 0; j < placements; ++j) {
                const std::size_t p = (n - w) - j * step;
                std::vector<std::size_t> slice(order.begin() + p,
                                               order.begin() + p + w);
                auto verdict = call.rank(slice);
                for (std::size_t t = 0; t < w; ++t)
                    order[p + t] = slice[(*verdict.ordering)[t]];
            }
        }
    }
    return make_outcome(query, docs, order, k, ledger, 0, t0);
}

namespace {

// Bottom-up chunk walk locating the insert position of a candidate that has
// already beaten the buffer's last element. `buffer` is sorted best-first.
std::size_t insert_position_max(std::size_t cand,
                                const std::vector<std::size_t>& buffer,
                                std::size_t c, Caller& call) {
    std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(buffer.size()) - 2;
    while (hi >= 0) {
        const std::ptrdiff_t lo =
            std::max<std::ptrdiff_t>(0, hi - static_cast<std::ptrdiff_t>(c - 2));
        std::vector<std::size_t> members{cand};
        for (std::ptrdiff_t p = lo; p <= hi; ++p) members.push_back(buffer[p]);
        const std::size_t w = call.select(members);
        if (w == 0) {  // candidate beats the whole chunk, keep walking up
            hi = lo - 1;
            continue;
        }
        // The winner reveals only the chunk's best; refine linearly below it
        // so placement stays exact under a total-order oracle.
        std::ptrdiff_t rl = lo + static_cast<std::ptrdiff_t>(w);
        while (rl <= hi) {
            std::vector<std::size_t> sub{cand};
            for (std::ptrdiff_t p = rl; p <= hi; ++p) sub.push_back(buffer[p]);
            const std::size_t w2 = call.select(sub);
            if (w2 == 0) return static_cast<std::size_t>(rl);
            rl += static_cast<std::ptrdiff_t>(w2);
        }
        return static_cast<std::size_t>(rl);
    }
    return 0;
}

std::size_t insert_position_sort(std::size_t cand,
                                 const std::vector<std::size_t>& buffer,
                                 std::size_t c, Caller& call) {
    std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(buffer.size()) - 2;
    while (hi >= 0) {
        const std::ptrdiff_t lo =
            std::max<std::ptrdiff_t>(0, hi - static_cast<std::ptrdiff_t>(c - 2));
        std::vector<std::size_t> members{cand};
        for (std::ptrdiff_t p = lo; p <= hi; ++p) members.push_back(buffer[p]);
        auto verdict = call.rank(members);
        std::size_t above = 0;  // chunk members ranked above the candidate
        for (std::size_t pos : *verdict.ordering) {
            if (pos == 0) break;
            ++above;
        }
        if (above == 0) {
            hi = lo - 1;
            continue;
        }
        return static_cast<std::size_t>(lo) + above;
    }
    return 0;
}

}  // namespace

RerankOutcome setwise_insertion(const Query& query,
                                const std::vector<const Document*>& docs,
                                std::size_t k, std::size_t set_size,
                                CompareMode compare_mode, bool use_prior,
                                Oracle& oracle) {
    const auto t0 = Clock::now();
    if (compare_mode == CompareMode::sort_compare &&
        (!oracle.supports(CallKind::rank_set) || !oracle.provides_weights()))
        throw UnsupportedCapabilityError("rank_set with weights (sort_compare)");

    CostLedger ledger;
    RecordingOracle rec(oracle, ledger);
    Caller call(query, docs, rec, use_prior);

    const std::size_t n = docs.size();
    const std::size_t c = set_size;
    const std::size_t kk = std::min(k, n);

    // Sorted buffer S: setwise heapsort over the first-stage top-k, |S|
    // fixed at kk thereafter.
    std::vector<std::size_t> buffer =
        heap_extract_top(iota_order(kk), kk, c, call);

    std::deque<std::size_t> queue;
    for (std::size_t i = kk; i < n; ++i) queue.push_back(i);

    std::uint64_t promotions = 0;
    auto promote = [&](std::size_t cand) {
        const std::size_t pos = compare_mode == CompareMode::max_compare
                                    ? insert_position_max(cand, buffer, c, call)
                                    : insert_position_sort(cand, buffer, c, call);
        buffer.insert(buffer.begin() + static_cast<std::ptrdiff_t>(pos), cand);
        buffer.pop_back();
        ++promotions;
    };

    while (!queue.empty()) {
        std::vector<std::size_t> cands;
        while (cands.size() < c - 1 && !queue.empty()) {
            cands.push_back(queue.front());
            queue.pop_front();
        }
        std::vector<std::size_t> members{buffer.back()};  // pivot at position 0
        members.insert(members.end(), cands.begin(), cands.end());

        if (compare_mode == CompareMode::max_compare) {
            const std::size_t w = call.select(members);
            if (w == 0) continue;  // pivot wins: discard the whole set
            // Un-promoted candidates return to the queue head: they may
            // still beat the new pivot on a later scan.
            for (std::size_t i = cands.size(); i-- > 0;)
                if (i != w - 1) queue.push_front(cands[i]);
            promote(cands[w - 1]);
        } else {
            auto verdict = call.rank(members);
            std::vector<std::size_t> above;  // candidates ranked above the pivot
            for (std::size_t pos : *verdict.ordering) {
                if (pos == 0) break;
                above.push_back(cands[pos - 1]);
            }
            if (above.empty()) continue;  // pivot outranks all: discard
            for (std::size_t i = above.size(); i-- > 1;)
                queue.push_front(above[i]);
            promote(above.front());
        }
    }
    return make_outcome(query, docs, buffer, kk, ledger, promotions, t0);
}

RerankOutcome rerank(const Query& query,
                     const std::vector<const Document*>& docs,
                     const AlgorithmConfig& cfg, Oracle& oracle) {
    validate_config(cfg, docs.size());
    switch (cfg.method) {
        case Method::pointwise_score:
            return pointwise_rerank(query, docs, cfg.k, oracle);
        case Method::pairwise_allpair:
            return pairwise_allpair(query, docs, cfg.k, oracle);
        case Method::pairwise_heapsort:
            return heapsort_rerank(query, docs, cfg.k, 2, cfg.use_prior, oracle);
        case Method::pairwise_bubblesort:
            return bubblesort_rerank(query, docs, cfg.k, 2, cfg.use_prior,
                                     cfg.bubble_early_exit, oracle);
        case Method::listwise_window:
            return listwise_rerank(query, docs, cfg.k, cfg.window, cfg.step,
                                   cfg.passes, oracle);
        case Method::setwise_heapsort:
            return heapsort_rerank(query, docs, cfg.k, cfg.set_size,
                                   cfg.use_prior, oracle);
        case Method::setwise_bubblesort:
            return bubblesort_rerank(query, docs, cfg.k, cfg.set_size,
                                     cfg.use_prior, cfg.bubble_early_exit, oracle);
        case Method::setwise_insertion:
            return setwise_insertion(query, docs, cfg.k, cfg.set_size,
                                     cfg.compare_mode, cfg.use_prior, oracle);
    }
    throw Error(ErrorKind::Config, "unhandled method");
}

}  // namespace setrank
