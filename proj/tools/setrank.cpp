// setrank: top-k reranking harness.
// Subcommands: rerank | bench | eval | synth. Exit codes: 0 ok, 2 config
// error, 3 data error, 4 oracle/transport error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "setrank/algorithms.hpp"
#include "setrank/client.hpp"
#include "setrank/eval.hpp"
#include "setrank/oracle.hpp"
#include "setrank/synth.hpp"

namespace fs = std::filesystem;
using namespace setrank;

namespace {

// ---------------------------------------------------------------- inputs --

struct RunSpec {
    std::string mode = "simulate";  // simulate | live
    std::string oracle = "perfect";  // perfect | pl (simulate mode)
    std::string run_path;
    std::string qrels_path;
    std::string corpus_path;
    std::string queries_path;
    std::string out_dir = "out";
    std::vector<std::string> methods;
    AlgorithmConfig algo;
    NoiseModel noise;
    EndpointConfig endpoint;
    std::size_t reps = 3;
    int threads = 0;   // 0 = runtime default
    bool no_timing = false;
};

struct QueryData {
    Query query;
    std::vector<Document> docs;  // first-stage order
    std::unordered_map<std::string, double> grades;
};

std::map<std::string, std::string> read_queries_tsv(const std::string& path) {
    std::map<std::string, std::string> out;
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Data, "cannot open queries file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error(ErrorKind::Parse, path + ":" + std::to_string(lineno) +
                                              ": expected <query_id>\\t<text>");
        out[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return out;
}

std::vector<QueryData> load_inputs(const RunSpec& spec) {
    if (spec.run_path.empty())
        throw Error(ErrorKind::Config, "--run is required");
    if (spec.mode == "live") {
        if (spec.corpus_path.empty())
            throw Error(ErrorKind::Config,
                        "live mode requires --corpus (document text feeds the "
                        "prompts)");
        validate_endpoint_config(spec.endpoint);
    } else if (spec.mode == "simulate") {
        if (spec.qrels_path.empty())
            throw Error(ErrorKind::Config,
                        "simulate mode requires --qrels (grades drive the "
                        "simulated oracle)");
    } else {
        throw Error(ErrorKind::Config, "unknown mode: " + spec.mode);
    }

    auto runs = read_trec_run(spec.run_path);
    if (runs.empty())
        throw Error(ErrorKind::Data, "run file is empty: " + spec.run_path);

    std::optional<Qrels> qrels;
    if (!spec.qrels_path.empty()) qrels = read_qrels(spec.qrels_path);

    std::map<std::string, Document> corpus;
    if (!spec.corpus_path.empty()) corpus = read_corpus_jsonl(spec.corpus_path);

    std::map<std::string, std::string> query_text;
    if (!spec.queries_path.empty())
        query_text = read_queries_tsv(spec.queries_path);

    std::vector<QueryData> data;
    for (const auto& [qid, ranking] : runs) {
        QueryData q;
        auto it = query_text.find(qid);
        q.query = {qid, it == query_text.end() ? qid : it->second};
        for (const auto& entry : ranking.entries) {
            auto doc_it = corpus.find(entry.doc_id);
            Document doc = doc_it != corpus.end()
                               ? doc_it->second
                               : make_document(entry.doc_id, "", 0.0);
            if (doc_it == corpus.end() && spec.mode == "live")
                throw Error(ErrorKind::Data,
                            "doc " + entry.doc_id + " missing from corpus");
            doc.prior_score = entry.score;
            q.docs.push_back(std::move(doc));
            if (qrels)
                q.grades[entry.doc_id] = qrels->grade(qid, entry.doc_id);
        }
        data.push_back(std::move(q));
    }
    return data;
}

// ---------------------------------------------------------------- oracle --

std::unique_ptr<Oracle> make_oracle(const RunSpec& spec, const QueryData& q,
                                    std::uint64_t seed) {
    if (spec.mode == "live")
        return std::make_unique<EndpointOracle>(spec.endpoint);
    if (spec.oracle == "perfect")
        return std::make_unique<PerfectOracle>(q.grades);
    if (spec.oracle == "pl")
        return std::make_unique<SimulatedOracle>(q.grades, spec.noise, seed,
                                                 q.query.query_id);
    throw Error(ErrorKind::Config, "unknown oracle: " + spec.oracle);
}

// ------------------------------------------------------------- execution --

struct QueryResult {
    Ranking ranking;
    CostLedger ledger;
    std::uint64_t promotions = 0;
};

std::vector<QueryResult> run_queries(const RunSpec& spec,
                                     const std::vector<QueryData>& data,
                                     const AlgorithmConfig& cfg) {
    std::vector<QueryResult> results(data.size());
    std::exception_ptr failure;

#ifdef _OPENMP
    if (spec.threads > 0) omp_set_num_threads(spec.threads);
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size());
         ++i) {
        try {
            const auto& q = data[static_cast<std::size_t>(i)];
            std::vector<const Document*> docs;
            for (const auto& d : q.docs) docs.push_back(&d);
            AlgorithmConfig local = cfg;
            local.k = std::min(local.k, docs.size());
            auto oracle = make_oracle(spec, q, cfg.rng_seed);
            auto out = rerank(q.query, docs, local, *oracle);
            results[static_cast<std::size_t>(i)] = {
                std::move(out.ranking), out.ledger, out.promotions};
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

std::string ledger_csv(const std::vector<QueryData>& data,
                       const std::vector<QueryResult>& results,
                       const std::string& method, bool no_timing) {
    std::ostringstream csv;
    csv << "query_id,method,calls_select,calls_rank,calls_score,docs,"
           "prompt_tokens,output_tokens,promotions,wall_ms\n";
    char buf[64];
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& l = results[i].ledger;
        std::snprintf(buf, sizeof(buf), "%.3f",
                      no_timing ? 0.0 : l.wall_clock_ms);
        csv << data[i].query.query_id << ',' << method << ','
            << l.calls_select_best << ',' << l.calls_rank_set << ','
            << l.calls_score << ',' << l.total_docs_in_calls << ','
            << l.prompt_tokens << ',' << l.output_tokens << ','
            << results[i].promotions << ',' << buf << '\n';
    }
    return csv.str();
}

// ------------------------------------------------------------- commands --

int cmd_rerank(const RunSpec& spec) {
    auto data = load_inputs(spec);
    const auto method = method_name(spec.algo.method);
    auto results = run_queries(spec, data, spec.algo);

    fs::create_directories(spec.out_dir);
    std::map<std::string, Ranking> runs;
    for (auto& r : results) runs[r.ranking.query_id] = r.ranking;
    write_trec_run((fs::path(spec.out_dir) / "run.txt").string(), runs, method);
    atomic_write((fs::path(spec.out_dir) / "ledger.csv").string(),
                 ledger_csv(data, results, method, spec.no_timing));
    std::cout << "wrote " << spec.out_dir << "/run.txt and ledger.csv ("
              << results.size() << " queries, method " << method << ")\n";
    return 0;
}

int cmd_bench(const RunSpec& spec) {
    if (spec.methods.size() < 2)
        throw Error(ErrorKind::Config, "bench needs at least 2 --methods");
    if (spec.qrels_path.empty())
        throw Error(ErrorKind::Config, "bench requires --qrels for NDCG");
    auto data = load_inputs(spec);
    auto qrels = read_qrels(spec.qrels_path);
    fs::create_directories(fs::path(spec.out_dir) / "per_query");

    struct MethodStats {
        Aggregate ndcg, calls, wall_ms;
    };
    std::map<std::string, MethodStats> stats;

    std::ostringstream csv;
    csv << "method,rep,ndcg@" << spec.algo.k << ",mean_calls,mean_wall_ms\n";
    char buf[128];
    for (const auto& name : spec.methods) {
        AlgorithmConfig cfg = spec.algo;
        cfg.method = parse_method(name);
        std::vector<double> rep_ndcg, rep_calls, rep_wall;
        for (std::size_t rep = 0; rep < spec.reps; ++rep) {
            cfg.rng_seed = spec.algo.rng_seed + rep;
            auto results = run_queries(spec, data, cfg);

            double ndcg_sum = 0.0, call_sum = 0.0, wall_sum = 0.0;
            for (std::size_t i = 0; i < results.size(); ++i) {
                ndcg_sum += ndcg_at_k(results[i].ranking, qrels, spec.algo.k);
                call_sum +=
                    static_cast<double>(results[i].ledger.total_calls());
                wall_sum += spec.no_timing ? 0.0
                                           : results[i].ledger.wall_clock_ms;
            }
            const double nq = static_cast<double>(results.size());
            rep_ndcg.push_back(ndcg_sum / nq);
            rep_calls.push_back(call_sum / nq);
            rep_wall.push_back(wall_sum / nq);

            atomic_write((fs::path(spec.out_dir) / "per_query" /
                          (name + "_rep" + std::to_string(rep) + ".csv"))
                             .string(),
                         ledger_csv(data, results, name, spec.no_timing));
            std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.3f,%.3f\n",
                          name.c_str(), rep, rep_ndcg.back(),
                          rep_calls.back(), rep_wall.back());
            csv << buf;
        }
        stats[name] = {aggregate_values(rep_ndcg), aggregate_values(rep_calls),
                       aggregate_values(rep_wall)};
    }

    std::ostringstream table;
    std::snprintf(buf, sizeof(buf), "%-22s %-20s %-22s %-18s\n", "method",
                  ("NDCG@" + std::to_string(spec.algo.k)).c_str(),
                  "#Inferences", "Avg Time (ms)");
    table << buf;
    for (const auto& name : spec.methods) {
        const auto& s = stats.at(name);
        std::snprintf(buf, sizeof(buf),
                      "%-22s %.4f +- %.4f     %8.2f +- %-8.2f %8.2f +- %.2f\n",
                      name.c_str(), s.ndcg.mean, s.ndcg.ci_half_width,
                      s.calls.mean, s.calls.ci_half_width, s.wall_ms.mean,
                      s.wall_ms.ci_half_width);
        table << buf;
    }
    if (spec.reps < 2)
        table << "note: single repetition, confidence intervals are 0-width\n";

    auto agg_row = [&](const std::string& name, const char* metric,
                       const Aggregate& a) {
        std::snprintf(buf, sizeof(buf), "%s,ALL,%s,%.6f,%.6f\n", name.c_str(),
                      metric, a.mean, a.ci_half_width);
        csv << buf;
    };
    for (const auto& name : spec.methods) {
        agg_row(name, "ndcg_mean_ci", stats.at(name).ndcg);
        agg_row(name, "calls_mean_ci", stats.at(name).calls);
        agg_row(name, "wall_ms_mean_ci", stats.at(name).wall_ms);
    }

    // headline ratio: the novel method against its setwise baseline
    auto ins = stats.find("setwise_insertion");
    auto heap = stats.find("setwise_heapsort");
    if (ins != stats.end() && heap != stats.end() && heap->second.calls.mean > 0) {
        const double ratio = ins->second.calls.mean / heap->second.calls.mean;
        const double delta = ins->second.ndcg.mean - heap->second.ndcg.mean;
        std::snprintf(buf, sizeof(buf),
                      "headline: insertion/heapsort calls ratio = %.4f, "
                      "NDCG delta = %+.4f\n",
                      ratio, delta);
        table << buf;
        std::snprintf(buf, sizeof(buf),
                      "headline,ALL,insertion_vs_heapsort_calls_ratio,%.6f,0\n"
                      "headline,ALL,insertion_vs_heapsort_ndcg_delta,%.6f,0\n",
                      ratio, delta);
        csv << buf;
    }

    atomic_write((fs::path(spec.out_dir) / "bench.csv").string(), csv.str());
    atomic_write((fs::path(spec.out_dir) / "bench.txt").string(), table.str());
    std::cout << table.str();
    return 0;
}

int cmd_eval(const std::string& run_path, const std::string& qrels_path,
             std::size_t k, const std::string& name,
             const std::string& out_path) {
    auto runs = read_trec_run(run_path);
    if (runs.empty())
        throw Error(ErrorKind::Data, "run file is empty: " + run_path);
    auto qrels = read_qrels(qrels_path);

    MetricReport report;
    report.method = name;
    const std::string metric = "ndcg@" + std::to_string(k);
    for (const auto& [qid, ranking] : runs)
        report.per_query[metric][qid] = ndcg_at_k(ranking, qrels, k);
    report.finalize();

    const auto csv = metric_report_csv(report);
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        atomic_write(out_path, csv);
        std::cout << "wrote " << out_path << " (" << runs.size()
                  << " queries, mean " << metric << " = "
                  << report.aggregates.at(metric).mean << ")\n";
    }
    return 0;
}

int cmd_synth(SynthConfig cfg, double target_tau, const std::string& out_dir) {
    if (target_tau > 0.0) {
        cfg.initial_noise = tau_target_calibrate(target_tau, cfg);
        std::cout << "calibrated sigma = " << cfg.initial_noise
                  << " for target tau " << target_tau << "\n";
    }
    auto world = generate(cfg);
    write_world(world, out_dir);
    std::cout << "wrote " << out_dir << " (" << cfg.n_queries << " queries x "
              << cfg.n_docs << " docs, mean tau to truth = "
              << mean_tau_to_truth(world) << ")\n";
    return 0;
}

void add_common_flags(CLI::App* cmd, RunSpec& spec) {
    cmd->add_option("--run", spec.run_path, "First-stage TREC run file");
    cmd->add_option("--qrels", spec.qrels_path, "TREC qrels file");
    cmd->add_option("--corpus", spec.corpus_path, "JSONL corpus (doc texts)");
    cmd->add_option("--queries", spec.queries_path, "TSV query texts");
    cmd->add_option("--out", spec.out_dir, "Output directory");
    cmd->add_option("--mode", spec.mode, "simulate | live");
    cmd->add_option("--oracle", spec.oracle, "perfect | pl (simulate mode)");
    cmd->add_option("--k", spec.algo.k, "Top-k to return");
    cmd->add_option("--set-size", spec.algo.set_size, "Documents per call");
    cmd->add_flag("--prior,!--no-prior", spec.algo.use_prior,
                  "Bias calls toward the prior (first-stage) order");
    cmd->add_option("--compare-mode", [&spec](const std::vector<std::string>& v) {
            spec.algo.compare_mode = parse_compare_mode(v.back());
            return true;
        }, "max | sort (setwise_insertion)");
    cmd->add_option("--window", spec.algo.window, "Listwise window size");
    cmd->add_option("--step", spec.algo.step, "Listwise window step");
    cmd->add_option("--passes", spec.algo.passes, "Listwise passes");
    cmd->add_flag("--no-early-exit",
                  [&spec](std::int64_t) { spec.algo.bubble_early_exit = false; },
                  "Disable the bubblesort swap-free early exit");
    cmd->add_option("--seed", spec.algo.rng_seed, "Base RNG seed");
    cmd->add_option("--threads", spec.threads, "Query worker pool size");
    cmd->add_flag("--no-timing", spec.no_timing,
                  "Zero wall-clock columns for byte-identical outputs");
    cmd->add_option("--tau", spec.noise.temperature, "PL oracle temperature");
    cmd->add_option("--uncertainty", spec.noise.uncertainty_threshold,
                    "PL prior-snap confidence threshold");
    cmd->add_option("--flip", spec.noise.flip_to_prior_prob,
                    "PL prior-snap probability");
    cmd->add_option("--endpoint-url", spec.endpoint.base_url,
                    "Completion endpoint base URL (live mode)");
    cmd->add_option("--model", spec.endpoint.model_name, "Model name to request");
    cmd->add_option("--max-retries", spec.endpoint.max_retries,
                    "Endpoint retry budget");
    cmd->add_option("--timeout", spec.endpoint.timeout_s,
                    "Endpoint timeout, seconds");
    cmd->add_flag("--logit-access", spec.endpoint.logit_access,
                  "Endpoint exposes token scores (enables score_one)");
    cmd->add_flag("--fallback-first", spec.endpoint.fallback_first,
                  "Treat unparseable responses as 'first doc wins'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"setrank: top-k document reranking over a comparison oracle"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);

    RunSpec spec;
    std::string method_flag = "setwise_heapsort";

    auto* rr = app.add_subcommand("rerank", "Rerank one run file");
    add_common_flags(rr, spec);
    rr->add_option("--method", method_flag, "Reranking method");

    auto* bench = app.add_subcommand("bench", "Method comparison matrix");
    add_common_flags(bench, spec);
    bench->add_option("--methods", spec.methods,
                      "Methods to compare (>= 2)")->delimiter(',');
    bench->add_option("--reps", spec.reps, "Repetitions per method");

    std::string eval_run, eval_qrels, eval_name = "run", eval_out;
    std::size_t eval_k = 10;
    auto* ev = app.add_subcommand("eval", "Score a run file against qrels");
    ev->add_option("--run", eval_run, "TREC run file")->required();
    ev->add_option("--qrels", eval_qrels, "TREC qrels file")->required();
    ev->add_option("--k", eval_k, "NDCG cutoff");
    ev->add_option("--name", eval_name, "Method label for the report");
    ev->add_option("--out", eval_out, "Output CSV path ('-' = stdout)");

    SynthConfig synth_cfg;
    double target_tau = 0.0;
    std::string synth_out = "world";
    auto* sy = app.add_subcommand("synth", "Generate a synthetic world");
    sy->add_option("--queries", synth_cfg.n_queries, "Number of queries");
    sy->add_option("--docs", synth_cfg.n_docs, "Docs per query");
    sy->add_option("--grade-levels", synth_cfg.grade_levels, "Grade levels");
    sy->add_option("--noise", synth_cfg.initial_noise,
                   "First-stage score noise sigma");
    sy->add_option("--target-tau", target_tau,
                   "Calibrate sigma to this mean Kendall tau");
    sy->add_option("--doc-tokens", synth_cfg.doc_tokens,
                   "Placeholder text length");
    sy->add_option("--seed", synth_cfg.rng_seed, "RNG seed");
    sy->add_option("--out", synth_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (rr->parsed()) {
            spec.algo.method = parse_method(method_flag);
            return cmd_rerank(spec);
        }
        if (bench->parsed()) return cmd_bench(spec);
        if (ev->parsed())
            return cmd_eval(eval_run, eval_qrels, eval_k, eval_name, eval_out);
        if (sy->parsed()) return cmd_synth(synth_cfg, target_tau, synth_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::Config: return 2;
            case ErrorKind::Data:
            case ErrorKind::Parse: return 3;
            default: return 4;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
