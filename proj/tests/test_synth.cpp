#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "setrank/eval.hpp"
#include "setrank/synth.hpp"

using namespace setrank;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("noise-free worlds rank exactly by grade") {
    SynthConfig cfg;
    cfg.n_queries = 4;
    cfg.n_docs = 50;
    cfg.initial_noise = 0.0;
    auto world = generate(cfg);
    REQUIRE(world.queries.size() == 4);
    CHECK(mean_tau_to_truth(world) == doctest::Approx(1.0));
    for (const auto& q : world.queries) {
        const auto& docs = world.docs.at(q.query_id);
        REQUIRE(docs.size() == 50);
        // docs come in first-stage order with prior_score attached
        for (std::size_t i = 1; i < docs.size(); ++i)
            CHECK(docs[i - 1].prior_score >= docs[i].prior_score);
        CHECK(world.qrels.has_query(q.query_id));
    }
}

TEST_CASE("generation is deterministic under a fixed seed") {
    SynthConfig cfg;
    cfg.n_queries = 3;
    cfg.n_docs = 40;
    cfg.initial_noise = 0.7;
    auto a = generate(cfg), b = generate(cfg);
    for (const auto& q : a.queries) {
        const auto& da = a.docs.at(q.query_id);
        const auto& db = b.docs.at(q.query_id);
        REQUIRE(da.size() == db.size());
        for (std::size_t i = 0; i < da.size(); ++i) {
            CHECK(da[i].doc_id == db[i].doc_id);
            CHECK(da[i].prior_score == db[i].prior_score);  // bitwise equal
        }
    }
    cfg.rng_seed = 43;
    auto c = generate(cfg);
    CHECK(c.docs.at("q0000")[0].doc_id != a.docs.at("q0000")[0].doc_id);
}

TEST_CASE("grade marginals match the requested fractions") {
    SynthConfig cfg;
    cfg.n_queries = 100;
    cfg.n_docs = 100;  // 10^4 grade draws
    auto world = generate(cfg);
    std::array<std::size_t, 4> counts{};
    for (const auto& q : world.queries)
        for (const auto& d : world.docs.at(q.query_id))
            ++counts[static_cast<std::size_t>(world.qrels.grade(q.query_id, d.doc_id))];
    const double n = 1e4;
    const std::array<double, 4> want{0.55, 0.20, 0.15, 0.10};
    for (std::size_t g = 0; g < 4; ++g) {
        const double p = counts[g] / n;
        const double ci = 4.0 * std::sqrt(want[g] * (1 - want[g]) / n);
        CAPTURE(g);
        CHECK(std::abs(p - want[g]) < ci);
    }
}

TEST_CASE("large noise destroys the first-stage signal") {
    SynthConfig cfg;
    cfg.n_queries = 50;
    cfg.n_docs = 100;
    cfg.grade_levels = 32;
    cfg.initial_noise = 1000.0;
    CHECK(std::abs(mean_tau_to_truth(generate(cfg))) < 0.05);
}

TEST_CASE("tau is monotone in the noise knob") {
    SynthConfig cfg;
    cfg.n_queries = 30;
    cfg.n_docs = 100;
    cfg.grade_levels = 32;
    double prev = 1.1;
    for (double sigma : {0.0, 2.0, 8.0, 64.0}) {
        cfg.initial_noise = sigma;
        const double tau = mean_tau_to_truth(generate(cfg));
        CHECK(tau < prev);
        prev = tau;
    }
}

TEST_CASE("calibration hits a 0.8 tau target") {
    SynthConfig cfg;
    cfg.n_docs = 100;
    cfg.grade_levels = 32;
    const double sigma = tau_target_calibrate(0.8, cfg);
    CHECK(sigma > 0.0);

    // remeasure on a fresh world with a different seed
    cfg.n_queries = 50;
    cfg.initial_noise = sigma;
    cfg.rng_seed = 777;
    const double tau = mean_tau_to_truth(generate(cfg));
    CHECK(tau == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("calibration boundary: target 1.0 means no noise") {
    SynthConfig cfg;
    cfg.grade_levels = 32;
    CHECK(tau_target_calibrate(1.0, cfg) == 0.0);
    CHECK_THROWS_AS(tau_target_calibrate(0.0, cfg), Error);
}

TEST_CASE("write_world emits the shared interchange formats") {
    SynthConfig cfg;
    cfg.n_queries = 2;
    cfg.n_docs = 10;
    cfg.initial_noise = 0.3;
    auto world = generate(cfg);

    auto dir = std::filesystem::temp_directory_path() / "setrank_synth_test";
    std::filesystem::remove_all(dir);
    write_world(world, dir.string());

    auto run = read_trec_run((dir / "run.txt").string());
    REQUIRE(run.size() == 2);
    CHECK(run["q0000"].entries.size() == 10);
    CHECK(run["q0000"].entries[0].doc_id ==
          world.initial.at("q0000").entries[0].doc_id);

    auto qrels = read_qrels((dir / "qrels.txt").string());
    CHECK(qrels.has_query("q0001"));

    auto corpus = read_corpus_jsonl((dir / "corpus.jsonl").string());
    CHECK(corpus.size() == 20);  // doc ids are query-scoped, no collisions

    auto queries = slurp(dir / "queries.tsv");
    CHECK(queries.find("q0000\t") != std::string::npos);
    CHECK(queries.find("q0001\t") != std::string::npos);
}

TEST_CASE("synth config validation") {
    SynthConfig cfg;
    cfg.n_docs = 0;
    CHECK_THROWS_AS(generate(cfg), Error);
    cfg = {};
    cfg.grade_fractions = {0.5, 0.5};  // size mismatch with 4 levels
    CHECK_THROWS_AS(generate(cfg), Error);
    cfg.grade_fractions = {0.9, 0.05, 0.04, 0.02};  // does not sum to 1
    CHECK_THROWS_AS(generate(cfg), Error);
    cfg = {};
    cfg.initial_noise = -1.0;
    CHECK_THROWS_AS(generate(cfg), Error);
}
