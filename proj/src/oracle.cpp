#include "setrank/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "setrank/client.hpp"

namespace setrank {

namespace {

// Simulated output-token cost per call kind. select_best answers like
// "Passage B" (2 tokens); rank_set emits an identifier list (about 3 tokens
// per entry, "[i] >"); score_one reads a logit and emits nothing.
constexpr std::uint64_t kSelectBestOutputTokens = 2;
constexpr std::uint64_t kRankSetOutputTokensPerDoc = 3;

std::vector<double> softmax(const std::vector<double>& utilities) {
    double max_u = *std::max_element(utilities.begin(), utilities.end());
    std::vector<double> w(utilities.size());
    double total = 0.0;
    for (std::size_t i = 0; i < utilities.size(); ++i) {
        w[i] = std::exp(utilities[i] - max_u);
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

std::vector<std::size_t> order_by_desc(const std::vector<double>& values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return values[a] > values[b];
    });
    return idx;
}

}  // namespace

std::string call_kind_name(CallKind kind) {
    switch (kind) {
        case CallKind::select_best: return "select_best";
        case CallKind::rank_set: return "rank_set";
        case CallKind::score_one: return "score_one";
    }
    return "unknown";
}

void validate_request(const OracleRequest& req) {
    if (req.query == nullptr)
        throw Error(ErrorKind::Oracle, "oracle request carries no query");
    if (req.kind == CallKind::score_one) {
        if (req.docs.size() != 1)
            throw ArityMismatchError("score_one requires exactly 1 document, got " +
                                     std::to_string(req.docs.size()));
    } else if (req.docs.size() < 2) {
        throw ArityMismatchError(call_kind_name(req.kind) +
                                 " requires at least 2 documents, got " +
                                 std::to_string(req.docs.size()));
    }
}

void Oracle::check(const OracleRequest& req) const {
    validate_request(req);
    if (!supports(req.kind))
        throw UnsupportedCapabilityError(call_kind_name(req.kind));
}

double PerfectOracle::grade_of(const Document& doc) const {
    auto it = grades_.find(doc.doc_id);
    return it == grades_.end() ? 0.0 : it->second;
}

OracleVerdict PerfectOracle::invoke(const OracleRequest& req) {
    check(req);
    OracleVerdict v;
    std::vector<double> grades(req.docs.size());
    for (std::size_t i = 0; i < req.docs.size(); ++i)
        grades[i] = grade_of(*req.docs[i]);

    switch (req.kind) {
        case CallKind::score_one:
            v.score = grades[0];
            break;
        case CallKind::select_best: {
            auto best = std::max_element(grades.begin(), grades.end());
            v.winner = static_cast<std::size_t>(best - grades.begin());
            v.weights = softmax(grades);
            v.output_token_cost = kSelectBestOutputTokens;
            break;
        }
        case CallKind::rank_set: {
            v.ordering = order_by_desc(grades);
            v.winner = v.ordering->front();
            v.weights = softmax(grades);
            v.output_token_cost = kRankSetOutputTokensPerDoc * req.docs.size();
            break;
        }
    }
    return v;
}

void validate_noise(const NoiseModel& noise) {
    if (!(noise.temperature > 0.0))
        throw Error(ErrorKind::Config, "noise temperature must be positive");
    if (noise.uncertainty_threshold < 0.0 || noise.uncertainty_threshold > 1.0)
        throw Error(ErrorKind::Config, "uncertainty threshold must lie in [0,1]");
    if (noise.flip_to_prior_prob < 0.0 || noise.flip_to_prior_prob > 1.0)
        throw Error(ErrorKind::Config, "flip_to_prior_prob must lie in [0,1]");
}

SimulatedOracle::SimulatedOracle(std::unordered_map<std::string, double> grades,
                                 NoiseModel noise, std::uint64_t seed,
                                 const std::string& query_id)
    : grades_(std::move(grades)),
      noise_(noise),
      rng_(mix_seed(seed, query_id)) {
    validate_noise(noise_);
}

double SimulatedOracle::grade_of(const Document& doc) const {
    auto it = grades_.find(doc.doc_id);
    return it == grades_.end() ? 0.0 : it->second;
}

OracleVerdict SimulatedOracle::invoke(const OracleRequest& req) {
    check(req);
    OracleVerdict v;
    const double tau = noise_.temperature;

    if (req.kind == CallKind::score_one) {
        std::normal_distribution<double> gauss(0.0, tau);
        v.score = grade_of(*req.docs[0]) + gauss(rng_);
        return v;
    }

    // Gumbel-max PL draw: utility_i = grade_i / tau + Gumbel(0,1).
    std::uniform_real_distribution<double> unif(
        std::numeric_limits<double>::min(), 1.0);
    std::vector<double> clean(req.docs.size()), perturbed(req.docs.size());
    for (std::size_t i = 0; i < req.docs.size(); ++i) {
        clean[i] = grade_of(*req.docs[i]) / tau;
        perturbed[i] = clean[i] - std::log(-std::log(unif(rng_)));
    }

    // Uncertainty of the clean predictive distribution gates the prior bias.
    auto clean_weights = softmax(clean);
    double confidence = *std::max_element(clean_weights.begin(), clean_weights.end());
    bool snap_to_prior = false;
    if (req.prior_ordered && confidence < noise_.uncertainty_threshold) {
        std::bernoulli_distribution flip(noise_.flip_to_prior_prob);
        snap_to_prior = flip(rng_);
    }

    if (req.kind == CallKind::select_best) {
        auto best = std::max_element(perturbed.begin(), perturbed.end());
        v.winner = snap_to_prior ? 0 : static_cast<std::size_t>(best - perturbed.begin());
        v.weights = clean_weights;
        v.output_token_cost = kSelectBestOutputTokens;
        return v;
    }

    // rank_set: a prior snap forces the first document to the front before
    // sorting, keeping ordering and weights mutually consistent.
    if (snap_to_prior)
        perturbed[0] = *std::max_element(perturbed.begin(), perturbed.end()) + 1.0;
    v.ordering = order_by_desc(perturbed);
    v.winner = v.ordering->front();
    v.weights = softmax(perturbed);
    v.output_token_cost = kRankSetOutputTokensPerDoc * req.docs.size();
    return v;
}

PromptOverheads PromptOverheads::builtin() {
    static const PromptOverheads measured = [] {
        PromptOverheads o;
        o.pointwise = template_overhead_tokens(TemplateName::pointwise_yesno, 1);
        o.pairwise = template_overhead_tokens(TemplateName::pairwise, 2);
        o.setwise_plain = template_overhead_tokens(TemplateName::setwise_plain, 3);
        o.setwise_prior = template_overhead_tokens(TemplateName::setwise_prior, 3);
        o.listwise = template_overhead_tokens(TemplateName::listwise, 4);
        return o;
    }();
    return measured;
}

OracleVerdict RecordingOracle::invoke(const OracleRequest& req) {
    validate_request(req);
    std::uint64_t overhead = 0;
    switch (req.kind) {
        case CallKind::score_one:
            ++ledger_.calls_score;
            overhead = overheads_.pointwise;
            break;
        case CallKind::select_best:
            ++ledger_.calls_select_best;
            if (req.docs.size() == 2)
                overhead = overheads_.pairwise;
            else
                overhead = req.prior_ordered ? overheads_.setwise_prior
                                             : overheads_.setwise_plain;
            break;
        case CallKind::rank_set:
            ++ledger_.calls_rank_set;
            overhead = overheads_.listwise;
            break;
    }
    ledger_.total_docs_in_calls += req.docs.size();
    ledger_.prompt_tokens += overhead + whitespace_tokens(req.query->text);
    for (const Document* d : req.docs) ledger_.prompt_tokens += d->token_estimate;

    OracleVerdict v = inner_.invoke(req);
    ledger_.output_tokens += v.output_token_cost;
    return v;
}

}  // namespace setrank
