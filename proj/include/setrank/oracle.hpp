#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "setrank/core.hpp"

namespace setrank {

enum class CallKind { select_best, rank_set, score_one };

std::string call_kind_name(CallKind kind);

// One oracle invocation. `docs` are presented in order; `prior_ordered`
// means they are in descending prior order and the consumer wants
// position-0 bias on uncertainty.
struct OracleRequest {
    const Query* query = nullptr;
    std::vector<const Document*> docs;
    CallKind kind = CallKind::select_best;
    bool prior_ordered = false;
};

struct OracleVerdict {
    std::optional<std::size_t> winner;               // select_best
    std::optional<std::vector<std::size_t>> ordering;  // rank_set, best first
    std::optional<std::vector<double>> weights;        // aligned with docs
    std::optional<double> score;                       // score_one
    std::uint64_t output_token_cost = 0;
};

/// Throws ArityMismatchError if the request violates arity invariants
/// (score_one requires exactly 1 doc; select_best/rank_set at least 2).
void validate_request(const OracleRequest& req);

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual bool supports(CallKind kind) const = 0;
    virtual bool provides_weights() const { return false; }
    virtual OracleVerdict invoke(const OracleRequest& req) = 0;

protected:
    /// Shared precondition check: request invariants + capability honesty.
    void check(const OracleRequest& req) const;
};

// Noise-free comparison oracle over known true grades. Ties break by
// presentation index.
class PerfectOracle : public Oracle {
public:
    explicit PerfectOracle(std::unordered_map<std::string, double> grades)
        : grades_(std::move(grades)) {}

    bool supports(CallKind) const override { return true; }
    bool provides_weights() const override { return true; }
    OracleVerdict invoke(const OracleRequest& req) override;

    double grade_of(const Document& doc) const;

private:
    std::unordered_map<std::string, double> grades_;
};

// Softness and prior-bias parameters of the simulated judge.
struct NoiseModel {
    double temperature = 0.5;            // tau > 0
    double uncertainty_threshold = 0.6;  // u in [0,1]
    double flip_to_prior_prob = 0.8;     // in [0,1]
};

void validate_noise(const NoiseModel& noise);

// Simulated LLM judge: Plackett-Luce choices over exp(grade / tau), sampled
// with the Gumbel-max trick so rank_set orderings are exact PL draws and the
// tau -> 0 limit recovers the perfect oracle. When the clean choice
// distribution is uncertain (max weight < u) and the request is
// prior-ordered, the verdict snaps to position 0 with probability
// flip_to_prior_prob.
//
// Each instance owns one RNG substream derived from (seed, query_id); use
// one instance per (query, run) so cross-query concurrency cannot change
// results.
class SimulatedOracle : public Oracle {
public:
    SimulatedOracle(std::unordered_map<std::string, double> grades,
                    NoiseModel noise, std::uint64_t seed,
                    const std::string& query_id);

    bool supports(CallKind) const override { return true; }
    bool provides_weights() const override { return true; }
    OracleVerdict invoke(const OracleRequest& req) override;

private:
    double grade_of(const Document& doc) const;

    std::unordered_map<std::string, double> grades_;
    NoiseModel noise_;
    std::mt19937_64 rng_;
};

// Per-call prompt-token overhead of the rendered template skeletons,
// measured once from the client module's templates (whitespace tokens of the
// skeleton with placeholders blanked). Indexed by call kind; select_best
// distinguishes pairwise (arity 2) from setwise plain/prior.
struct PromptOverheads {
    std::uint64_t pointwise = 0;
    std::uint64_t pairwise = 0;
    std::uint64_t setwise_plain = 0;
    std::uint64_t setwise_prior = 0;
    std::uint64_t listwise = 0;

    /// The defaults measured from the built-in templates.
    static PromptOverheads builtin();
};

// Forwards requests to an inner oracle and charges a CostLedger: one call
// counter per kind, document/query token estimates plus template overhead
// into prompt_tokens, and the verdict's output cost into output_tokens.
// Errors propagate unchanged but still count as one call.
class RecordingOracle : public Oracle {
public:
    RecordingOracle(Oracle& inner, CostLedger& ledger,
                    PromptOverheads overheads = PromptOverheads::builtin())
        : inner_(inner), ledger_(ledger), overheads_(overheads) {}

    bool supports(CallKind kind) const override { return inner_.supports(kind); }
    bool provides_weights() const override { return inner_.provides_weights(); }
    OracleVerdict invoke(const OracleRequest& req) override;

private:
    Oracle& inner_;
    CostLedger& ledger_;
    PromptOverheads overheads_;
};

}  // namespace setrank
