#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "setrank/core.hpp"

namespace setrank {

// Synthetic world generator: ground-truth grades plus a first-stage ranking
// whose agreement with truth is a single noise knob (additive Gaussian on
// the scores).
struct SynthConfig {
    std::size_t n_queries = 10;
    std::size_t n_docs = 100;
    int grade_levels = 4;  // grades 0 .. grade_levels-1
    // Probability per grade, summing to 1. Empty = the default for
    // grade_levels (skewed for 4 levels, uniform otherwise).
    std::vector<double> grade_fractions;
    double initial_noise = 0.0;  // sigma of the first-stage score noise
    std::uint64_t rng_seed = 42;
    std::size_t doc_tokens = 16;  // placeholder text length
};

void validate_synth_config(const SynthConfig& cfg);

struct SynthWorld {
    std::vector<Query> queries;
    // per query, documents in first-stage order
    std::map<std::string, std::vector<Document>> docs;
    std::map<std::string, Ranking> initial;  // first-stage run
    std::map<std::string, Ranking> truth;    // grade-sorted ideal ordering
    Qrels qrels;
};

/// Fully determined by cfg.rng_seed: per query draws grades from
/// grade_fractions, first-stage score = grade + Normal(0, sigma), initial
/// ranking sorts by that score (ties by doc_id).
SynthWorld generate(const SynthConfig& cfg);

/// Mean Kendall tau between the initial rankings and truth.
double mean_tau_to_truth(const SynthWorld& world);

/// Bisection over sigma until the mean tau over 50 generated queries is
/// within +-0.03 of target. Throws NoConvergenceError after 40 steps.
double tau_target_calibrate(double target_tau, SynthConfig cfg);

/// Writes the world as TREC run + qrels + JSONL corpus + queries TSV so the
/// live and simulated pipelines share formats.
void write_world(const SynthWorld& world, const std::string& out_dir);

}  // namespace setrank
