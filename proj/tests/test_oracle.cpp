#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "setrank/oracle.hpp"

using namespace setrank;

namespace {

const Query kQuery{"q1", "test query"};

std::vector<Document> make_docs(std::initializer_list<const char*> ids) {
    std::vector<Document> docs;
    for (const char* id : ids) docs.push_back(make_document(id, "", 0.0));
    return docs;
}

OracleRequest make_request(const std::vector<Document>& docs, CallKind kind,
                           bool prior_ordered = false) {
    OracleRequest req;
    req.query = &kQuery;
    req.kind = kind;
    req.prior_ordered = prior_ordered;
    for (const auto& d : docs) req.docs.push_back(&d);
    return req;
}

}  // namespace

TEST_CASE("request arity invariants") {
    auto docs = make_docs({"a", "b"});
    auto req = make_request(docs, CallKind::score_one);
    CHECK_THROWS_AS(validate_request(req), ArityMismatchError);

    auto one = make_docs({"a"});
    auto single = make_request(one, CallKind::select_best);
    CHECK_THROWS_AS(validate_request(single), ArityMismatchError);
}

TEST_CASE("perfect oracle select_best is argmax of grades") {
    auto docs = make_docs({"a", "b", "c"});
    PerfectOracle oracle({{"a", 0.0}, {"b", 3.0}, {"c", 1.0}});
    auto v = oracle.invoke(make_request(docs, CallKind::select_best));
    CHECK(*v.winner == 1);
}

TEST_CASE("perfect oracle rank_set breaks ties by presentation index") {
    auto docs = make_docs({"a", "b", "c"});
    PerfectOracle oracle({{"a", 2.0}, {"b", 0.0}, {"c", 2.0}});
    auto v = oracle.invoke(make_request(docs, CallKind::rank_set));
    CHECK(*v.ordering == std::vector<std::size_t>{0, 2, 1});
    CHECK(*v.winner == 0);  // consistency: winner equals ordering front
}

TEST_CASE("perfect oracle score_one returns the grade") {
    auto docs = make_docs({"a"});
    PerfectOracle oracle({{"a", 2.0}});
    auto v = oracle.invoke(make_request(docs, CallKind::score_one));
    CHECK(*v.score == doctest::Approx(2.0));
}

TEST_CASE("simulated oracle: sharp temperature concentrates on the best doc") {
    // closed form: softmax(grades/0.25) gives p(0) = e^12/(e^12+2) ~ 1-1.2e-5
    auto docs = make_docs({"a", "b", "c"});
    SimulatedOracle oracle({{"a", 3.0}, {"b", 0.0}, {"c", 0.0}},
                           {.temperature = 0.25, .flip_to_prior_prob = 0.0}, 11,
                           "q1");
    int hits = 0;
    for (int i = 0; i < 10000; ++i)
        if (*oracle.invoke(make_request(docs, CallKind::select_best)).winner == 0)
            ++hits;
    CHECK(hits > 9900);
}

TEST_CASE("simulated oracle: tau -> 0 recovers the perfect oracle") {
    auto docs = make_docs({"a", "b", "c", "d"});
    PerfectOracle perfect({{"a", 1.0}, {"b", 4.0}, {"c", 2.0}, {"d", 3.0}});
    SimulatedOracle noisy({{"a", 1.0}, {"b", 4.0}, {"c", 2.0}, {"d", 3.0}},
                          {.temperature = 1e-4, .flip_to_prior_prob = 0.0}, 17,
                          "q1");
    int disagreements = 0;
    for (int i = 0; i < 10000; ++i) {
        auto req = make_request(docs, CallKind::select_best);
        if (*noisy.invoke(req).winner != *perfect.invoke(req).winner)
            ++disagreements;
    }
    CHECK(static_cast<double>(disagreements) / 10000.0 < 1e-3);
}

TEST_CASE("simulated oracle: forced prior bias always returns position 0") {
    auto docs = make_docs({"a", "b", "c"});
    SimulatedOracle oracle(
        {{"a", 1.0}, {"b", 1.0}, {"c", 1.0}},
        {.temperature = 1.0, .uncertainty_threshold = 1.0, .flip_to_prior_prob = 1.0},
        23, "q1");
    for (int i = 0; i < 200; ++i) {
        auto v = oracle.invoke(make_request(docs, CallKind::select_best, true));
        CHECK(*v.winner == 0);
    }
    // rank_set with a forced snap keeps ordering/weights consistent
    auto v = oracle.invoke(make_request(docs, CallKind::rank_set, true));
    CHECK(v.ordering->front() == 0);
    for (std::size_t i = 1; i < v.ordering->size(); ++i)
        CHECK((*v.weights)[(*v.ordering)[i - 1]] >= (*v.weights)[(*v.ordering)[i]]);
}

TEST_CASE("simulated oracle: uniform grades without prior are symmetric") {
    auto docs = make_docs({"a", "b", "c"});
    SimulatedOracle oracle({{"a", 1.0}, {"b", 1.0}, {"c", 1.0}},
                           {.temperature = 0.7, .flip_to_prior_prob = 0.0}, 31,
                           "q1");
    std::array<int, 3> counts{};
    for (int i = 0; i < 10000; ++i)
        ++counts[*oracle.invoke(make_request(docs, CallKind::select_best)).winner];
    for (int c : counts)
        CHECK(std::abs(c / 10000.0 - 1.0 / 3.0) < 0.02);
}

TEST_CASE("simulated oracle: prior-neutral distribution is permutation invariant") {
    // flip_to_prior_prob = 0: winner frequency per doc must not depend on
    // presentation slot (up to index relabeling)
    std::unordered_map<std::string, double> grades{
        {"a", 1.0}, {"b", 1.5}, {"c", 1.0}};
    auto docs = make_docs({"a", "b", "c"});
    auto permuted = make_docs({"c", "a", "b"});
    NoiseModel noise{.temperature = 0.8, .uncertainty_threshold = 1.0,
                     .flip_to_prior_prob = 0.0};

    auto frequency_of_b = [&](const std::vector<Document>& presentation,
                              std::uint64_t seed) {
        SimulatedOracle oracle(grades, noise, seed, "q1");
        int hits = 0;
        for (int i = 0; i < 20000; ++i) {
            auto v = oracle.invoke(
                make_request(presentation, CallKind::select_best, true));
            if (presentation[*v.winner].doc_id == "b") ++hits;
        }
        return hits / 20000.0;
    };
    CHECK(std::abs(frequency_of_b(docs, 5) - frequency_of_b(permuted, 6)) < 0.02);
}

TEST_CASE("simulated oracle: determinism under a fixed seed") {
    auto docs = make_docs({"a", "b", "c"});
    std::unordered_map<std::string, double> grades{
        {"a", 1.0}, {"b", 2.0}, {"c", 0.0}};
    NoiseModel noise{.temperature = 1.5};
    auto run = [&] {
        SimulatedOracle oracle(grades, noise, 99, "q7");
        std::vector<std::size_t> winners;
        for (int i = 0; i < 100; ++i)
            winners.push_back(
                *oracle.invoke(make_request(docs, CallKind::select_best)).winner);
        return winners;
    };
    CHECK(run() == run());
}

TEST_CASE("noise model validation") {
    CHECK_THROWS_AS(validate_noise({.temperature = 0.0}), Error);
    CHECK_THROWS_AS(validate_noise({.temperature = 1.0, .uncertainty_threshold = 1.5}),
                    Error);
    CHECK_THROWS_AS(validate_noise({.temperature = 1.0, .flip_to_prior_prob = -0.1}),
                    Error);
}

namespace {

// Advertises nothing; proves capability honesty in the recording wrapper.
class NullOracle : public Oracle {
public:
    bool supports(CallKind) const override { return false; }
    OracleVerdict invoke(const OracleRequest& req) override {
        check(req);
        return {};
    }
};

}  // namespace

TEST_CASE("capability honesty: unadvertised kinds error, never degrade") {
    auto docs = make_docs({"a", "b"});
    NullOracle null_oracle;
    CHECK_THROWS_AS(null_oracle.invoke(make_request(docs, CallKind::select_best)),
                    UnsupportedCapabilityError);
}

TEST_CASE("recording oracle counts calls, docs and tokens") {
    Query query{"q1", "two words"};
    std::vector<Document> docs{make_document("a", "one two three", 0.0),
                               make_document("b", "four five", 0.0),
                               make_document("c", "", 0.0)};
    PerfectOracle inner({{"a", 1.0}, {"b", 2.0}, {"c", 0.0}});
    CostLedger ledger;
    RecordingOracle rec(inner, ledger);

    OracleRequest req;
    req.query = &query;
    req.kind = CallKind::select_best;
    for (const auto& d : docs) req.docs.push_back(&d);
    for (int i = 0; i < 3; ++i) rec.invoke(req);
    CHECK(ledger.calls_select_best == 3);
    CHECK(ledger.total_docs_in_calls == 9);

    // prompt tokens: 3 x (setwise overhead + 2 query tokens + 5 doc tokens)
    const auto overhead = PromptOverheads::builtin().setwise_plain;
    CHECK(ledger.prompt_tokens == 3 * (overhead + 2 + 5));
    CHECK(ledger.output_tokens == 3 * 2);  // "Passage X" style answers

    OracleRequest score;
    score.query = &query;
    score.kind = CallKind::score_one;
    score.docs = {&docs[0]};
    rec.invoke(score);
    CHECK(ledger.calls_score == 1);
    CHECK(ledger.total_calls() == 4);
}

TEST_CASE("recording oracle counts failed calls and propagates the error") {
    Query query{"q1", "q"};
    std::vector<Document> docs{make_document("a", "", 0.0),
                               make_document("b", "", 0.0)};
    NullOracle inner;
    CostLedger ledger;
    RecordingOracle rec(inner, ledger);
    OracleRequest req;
    req.query = &query;
    req.kind = CallKind::select_best;
    req.docs = {&docs[0], &docs[1]};
    CHECK_THROWS_AS(rec.invoke(req), UnsupportedCapabilityError);
    CHECK(ledger.calls_select_best == 1);
}
