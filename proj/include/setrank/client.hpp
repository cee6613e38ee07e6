#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "setrank/core.hpp"
#include "setrank/oracle.hpp"

namespace setrank {

enum class TemplateName {
    pointwise_yesno,
    pointwise_qlm,
    pairwise,
    listwise,
    setwise_plain,
    setwise_prior,
};

struct PromptTemplate {
    TemplateName name;
    std::string skeleton;  // placeholders: {query}, {passage_i}, {num}
    std::uint64_t overhead_tokens;
};

const PromptTemplate& builtin_template(TemplateName name);

/// Whitespace tokens of the skeleton rendered at `arity` with blank
/// query/passages — the fixed per-call prompt overhead of a template.
std::uint64_t template_overhead_tokens(TemplateName name, std::size_t arity);

/// Fills a template. Documents are labeled A, B, C, ... in presentation
/// order (numeric identifiers for listwise). When `use_prior`, the caller
/// must already present docs in descending prior order. Throws
/// ArityMismatchError when the doc count does not fit the template.
std::string render_prompt(TemplateName name, const Query& query,
                          const std::vector<const Document*>& docs,
                          bool use_prior);

/// Finds the first label token (A..Z within arity, bare or "Passage X",
/// case-insensitive) and returns its index. Throws MalformedResponseError
/// when no label is found. Never returns an out-of-range index.
std::size_t parse_select_best(const std::string& raw_response, std::size_t arity);

/// Extracts integer identifiers (bracketed or bare, 1-based, within arity)
/// in order of first appearance; omitted identifiers are filled at the tail
/// in presentation order. Throws MalformedResponseError when none parse.
std::vector<std::size_t> parse_listwise_order(const std::string& raw_response,
                                              std::size_t arity);

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string model_name = "default";
    double timeout_s = 30.0;
    int max_retries = 3;
    int backoff_base_ms = 100;
    bool logit_access = false;
    int max_tokens = 128;  // greedy decoding; configuration, not reproduction
    // Wire field names of the minimal JSON completion contract, adjustable
    // so any local inference server can be adapted.
    std::string prompt_field = "prompt";
    std::string model_field = "model";
    std::string max_tokens_field = "max_tokens";
    std::string logprobs_field = "logprobs";
    std::string text_field = "text";
    std::string scores_field = "token_scores";
    // Bearer token read from this environment variable; never logged.
    std::string token_env = "SETRANK_API_TOKEN";
    // Map MalformedResponse after exhausted retries to winner = position 0
    // instead of raising.
    bool fallback_first = false;
};

void validate_endpoint_config(const EndpointConfig& cfg);

// Oracle backed by an HTTP POST {base_url}/generate endpoint speaking the
// minimal JSON completion contract: {model, prompt, max_tokens, logprobs?}
// in, {text, token_scores?} out. Retries transport failures, 5xx responses
// and malformed completions with exponential backoff.
class EndpointOracle : public Oracle {
public:
    explicit EndpointOracle(EndpointConfig cfg);

    bool supports(CallKind kind) const override;
    bool provides_weights() const override { return cfg_.logit_access; }
    OracleVerdict invoke(const OracleRequest& req) override;

    const EndpointConfig& config() const { return cfg_; }

private:
    struct Completion {
        std::string text;
        std::vector<double> token_scores;
        std::string retry_reason;  // non-empty: retryable failure, no completion
    };
    Completion complete(const std::string& prompt, bool want_scores);

    EndpointConfig cfg_;
};

}  // namespace setrank
