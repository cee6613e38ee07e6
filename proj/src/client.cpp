#include "setrank/client.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace setrank {

namespace {

std::string passage_label(std::size_t index) {
    return std::string("Passage ") + static_cast<char>('A' + index);
}

void check_arity(TemplateName name, std::size_t arity) {
    switch (name) {
        case TemplateName::pointwise_yesno:
        case TemplateName::pointwise_qlm:
            if (arity != 1)
                throw ArityMismatchError("pointwise templates take exactly 1 passage");
            return;
        case TemplateName::pairwise:
            if (arity != 2)
                throw ArityMismatchError("pairwise template takes exactly 2 passages");
            return;
        case TemplateName::listwise:
        case TemplateName::setwise_plain:
        case TemplateName::setwise_prior:
            if (arity < 2)
                throw ArityMismatchError("set templates take at least 2 passages");
            if (arity > 26)
                throw ArityMismatchError("set templates support at most 26 passages");
            return;
    }
}

const char* kPriorClause =
    "The passages are listed in descending order of a prior relevance "
    "estimate, with Passage A estimated the most relevant. If you are "
    "uncertain which passage is the most relevant, output Passage A.";

}  // namespace

const PromptTemplate& builtin_template(TemplateName name) {
    static const std::vector<PromptTemplate> templates = [] {
        std::vector<PromptTemplate> t;
        t.push_back({TemplateName::pointwise_yesno,
                     "Passage: {passage_1}, Query: {query}.\n"
                     "Does the passage answer the query? Answer \"Yes\" or \"No\".",
                     0});
        t.push_back({TemplateName::pointwise_qlm,
                     "Passage: {passage_1}.\n"
                     "Please write a question based on this passage.",
                     0});
        t.push_back({TemplateName::pairwise,
                     "Given a query \"{query}\", which of the following passages is "
                     "more relevant to the query?\n\n"
                     "Passage A: \"{passage_1}\"\n\n"
                     "Passage B: \"{passage_2}\"\n\n"
                     "Output Passage A or Passage B.",
                     0});
        t.push_back({TemplateName::listwise,
                     "The following are {num} passages, each indicated by number "
                     "identifier [].\n"
                     "I can rank them based on their relevance to query: {query}\n"
                     "{passages}\n"
                     "The ranking results of the {num} passages (only identifiers) "
                     "is:",
                     0});
        t.push_back({TemplateName::setwise_plain,
                     "Given a query \"{query}\", which of the following passages is "
                     "the most relevant to the query?\n\n"
                     "{passages}\n"
                     "Output only the label of the most relevant passage.",
                     0});
        t.push_back({TemplateName::setwise_prior,
                     "Given a query \"{query}\", which of the following passages is "
                     "the most relevant to the query?\n\n"
                     "{passages}\n" +
                         std::string(kPriorClause) +
                         "\nOutput only the label of the most relevant passage.",
                     0});
        for (auto& tmpl : t)
            tmpl.overhead_tokens =
                template_overhead_tokens(tmpl.name, tmpl.name == TemplateName::pairwise
                                                        ? 2
                                                        : tmpl.name == TemplateName::listwise
                                                              ? 4
                                                              : tmpl.name == TemplateName::setwise_plain ||
                                                                        tmpl.name == TemplateName::setwise_prior
                                                                    ? 3
                                                                    : 1);
        return t;
    }();
    for (const auto& t : templates)
        if (t.name == name) return t;
    throw Error(ErrorKind::Config, "unknown template");
}

std::string render_prompt(TemplateName name, const Query& query,
                          const std::vector<const Document*>& docs,
                          bool use_prior) {
    check_arity(name, docs.size());
    std::ostringstream out;
    switch (name) {
        case TemplateName::pointwise_yesno:
            out << "Passage: " << docs[0]->text << ", Query: " << query.text
                << ".\nDoes the passage answer the query? Answer \"Yes\" or \"No\".";
            break;
        case TemplateName::pointwise_qlm:
            out << "Passage: " << docs[0]->text
                << ".\nPlease write a question based on this passage.";
            break;
        case TemplateName::pairwise:
            out << "Given a query \"" << query.text
                << "\", which of the following passages is more relevant to the "
                   "query?\n\nPassage A: \"" << docs[0]->text
                << "\"\n\nPassage B: \"" << docs[1]->text
                << "\"\n\nOutput Passage A or Passage B.";
            break;
        case TemplateName::listwise:
            out << "The following are " << docs.size()
                << " passages, each indicated by number identifier [].\n"
                   "I can rank them based on their relevance to query: "
                << query.text << "\n";
            for (std::size_t i = 0; i < docs.size(); ++i)
                out << '[' << (i + 1) << "] " << docs[i]->text << '\n';
            out << "The ranking results of the " << docs.size()
                << " passages (only identifiers) is:";
            break;
        case TemplateName::setwise_plain:
        case TemplateName::setwise_prior:
            out << "Given a query \"" << query.text
                << "\", which of the following passages is the most relevant to "
                   "the query?\n\n";
            for (std::size_t i = 0; i < docs.size(); ++i)
                out << passage_label(i) << ": \"" << docs[i]->text << "\"\n";
            if (name == TemplateName::setwise_prior || use_prior)
                out << kPriorClause << '\n';
            out << "Output only the label of the most relevant passage.";
            break;
    }
    return out.str();
}

std::uint64_t template_overhead_tokens(TemplateName name, std::size_t arity) {
    Query blank_query{"q", ""};
    std::vector<Document> blanks(arity);
    std::vector<const Document*> docs;
    docs.reserve(arity);
    for (auto& d : blanks) docs.push_back(&d);
    return whitespace_tokens(render_prompt(name, blank_query, docs, false));
}

std::size_t parse_select_best(const std::string& raw_response, std::size_t arity) {
    if (arity < 2) throw ArityMismatchError("select_best parsing needs arity >= 2");
    const std::size_t labels = std::min<std::size_t>(arity, 26);
    std::string token;
    auto flush = [&]() -> std::optional<std::size_t> {
        std::optional<std::size_t> hit;
        if (token.size() == 1) {
            char c = static_cast<char>(std::tolower(static_cast<unsigned char>(token[0])));
            if (c >= 'a' && c < static_cast<char>('a' + labels))
                hit = static_cast<std::size_t>(c - 'a');
        }
        token.clear();
        return hit;
    };
    for (unsigned char ch : raw_response) {
        if (std::isalnum(ch)) {
            token.push_back(static_cast<char>(ch));
        } else if (auto hit = flush()) {
            return *hit;
        }
    }
    if (auto hit = flush()) return *hit;
    throw MalformedResponseError(raw_response);
}

std::vector<std::size_t> parse_listwise_order(const std::string& raw_response,
                                              std::size_t arity) {
    if (arity < 2) throw ArityMismatchError("rank_set parsing needs arity >= 2");
    std::vector<std::size_t> order;
    std::vector<bool> seen(arity, false);
    std::size_t value = 0;
    bool in_number = false;
    auto flush = [&] {
        if (in_number && value >= 1 && value <= arity && !seen[value - 1]) {
            seen[value - 1] = true;
            order.push_back(value - 1);
        }
        in_number = false;
        value = 0;
    };
    for (unsigned char ch : raw_response) {
        if (std::isdigit(ch)) {
            if (value < 1000000) value = value * 10 + (ch - '0');
            in_number = true;
        } else {
            flush();
        }
    }
    flush();
    if (order.empty()) throw MalformedResponseError(raw_response);
    for (std::size_t i = 0; i < arity; ++i)
        if (!seen[i]) order.push_back(i);  // tail-fill in presentation order
    return order;
}

void validate_endpoint_config(const EndpointConfig& cfg) {
    if (!(cfg.timeout_s > 0.0))
        throw Error(ErrorKind::Config, "endpoint timeout must be positive");
    if (cfg.max_retries < 0)
        throw Error(ErrorKind::Config, "max_retries must be >= 0");
    if (cfg.base_url.empty())
        throw Error(ErrorKind::Config, "endpoint base_url is empty");
}

EndpointOracle::EndpointOracle(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    validate_endpoint_config(cfg_);
}

bool EndpointOracle::supports(CallKind kind) const {
    switch (kind) {
        case CallKind::select_best: return true;
        case CallKind::rank_set: return true;  // listwise parsing or logits
        case CallKind::score_one: return cfg_.logit_access;
    }
    return false;
}

// One request; retryable failures (no connection, 5xx, unparsable body JSON)
// come back as an explanation string instead of a Completion. Non-retryable
// HTTP statuses throw.
EndpointOracle::Completion EndpointOracle::complete(const std::string& prompt,
                                                    bool want_scores) {
    nlohmann::json body;
    body[cfg_.model_field] = cfg_.model_name;
    body[cfg_.prompt_field] = prompt;
    body[cfg_.max_tokens_field] = cfg_.max_tokens;
    if (want_scores) body[cfg_.logprobs_field] = true;
    const std::string payload = body.dump();

    httplib::Client cli(cfg_.base_url);
    cli.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    cli.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token)
        cli.set_bearer_token_auth(token);

    auto res = cli.Post("/generate", payload, "application/json");
    if (!res)
        return {.retry_reason = "connection failed: " + httplib::to_string(res.error())};
    if (res->status >= 500)
        return {.retry_reason = "server error HTTP " + std::to_string(res->status)};
    if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        return {.retry_reason = std::string("bad response JSON: ") + e.what()};
    }
    Completion c;
    if (j.contains(cfg_.text_field)) c.text = j[cfg_.text_field].get<std::string>();
    if (j.contains(cfg_.scores_field))
        c.token_scores = j[cfg_.scores_field].get<std::vector<double>>();
    return c;
}

OracleVerdict EndpointOracle::invoke(const OracleRequest& req) {
    check(req);
    const std::size_t arity = req.docs.size();

    TemplateName tmpl;
    bool want_scores = cfg_.logit_access;
    switch (req.kind) {
        case CallKind::score_one:
            tmpl = TemplateName::pointwise_yesno;
            want_scores = true;
            break;
        case CallKind::select_best:
            tmpl = arity == 2 ? TemplateName::pairwise
                              : (req.prior_ordered ? TemplateName::setwise_prior
                                                   : TemplateName::setwise_plain);
            break;
        case CallKind::rank_set:
            tmpl = TemplateName::listwise;
            break;
    }
    const std::string prompt = render_prompt(tmpl, *req.query, req.docs,
                                             req.prior_ordered);

    // Transport failures and malformed completions share one retry budget,
    // with exponential backoff between attempts.
    std::optional<MalformedResponseError> malformed;
    std::string transport_reason;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg_.backoff_base_ms << (attempt - 1)));
        Completion c = complete(prompt, want_scores);
        if (!c.retry_reason.empty()) {
            transport_reason = c.retry_reason;
            malformed.reset();
            continue;
        }
        OracleVerdict v;
        v.output_token_cost = whitespace_tokens(c.text);
        try {
            switch (req.kind) {
                case CallKind::score_one:
                    if (c.token_scores.empty()) throw MalformedResponseError(c.text);
                    v.score = std::accumulate(c.token_scores.begin(),
                                              c.token_scores.end(), 0.0);
                    return v;
                case CallKind::select_best:
                    v.winner = parse_select_best(c.text, arity);
                    return v;
                case CallKind::rank_set: {
                    if (cfg_.logit_access && c.token_scores.size() == arity) {
                        std::vector<std::size_t> idx(arity);
                        std::iota(idx.begin(), idx.end(), 0);
                        std::stable_sort(idx.begin(), idx.end(),
                                         [&](std::size_t a, std::size_t b) {
                                             return c.token_scores[a] > c.token_scores[b];
                                         });
                        v.ordering = idx;
                        v.weights = c.token_scores;
                    } else {
                        v.ordering = parse_listwise_order(c.text, arity);
                    }
                    v.winner = v.ordering->front();
                    return v;
                }
            }
        } catch (const MalformedResponseError& e) {
            malformed = e;
            transport_reason.clear();
        }
    }
    if (malformed) {
        if (cfg_.fallback_first && req.kind == CallKind::select_best) {
            OracleVerdict v;
            v.winner = 0;
            return v;
        }
        throw *malformed;
    }
    throw TransportError(transport_reason + " after " +
                         std::to_string(cfg_.max_retries + 1) + " attempts");
}

}  // namespace setrank
