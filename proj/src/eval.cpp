#include "setrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace setrank {

double ndcg_at_k(const Ranking& ranking, const Qrels& qrels, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::Config, "ndcg cutoff must be >= 1");
    if (!qrels.has_query(ranking.query_id))
        throw UnknownQueryError(ranking.query_id);

    double dcg = 0.0;
    const std::size_t depth = std::min(k, ranking.entries.size());
    for (std::size_t i = 0; i < depth; ++i) {
        const int g = qrels.grade(ranking.query_id, ranking.entries[i].doc_id);
        dcg += (std::exp2(g) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }

    const auto& judged = qrels.judgments().at(ranking.query_id);
    std::vector<int> grades;
    grades.reserve(judged.size());
    for (const auto& [doc, g] : judged) grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<int>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
        idcg += (std::exp2(grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);

    return idcg > 0.0 ? dcg / idcg : 0.0;
}

std::uint64_t count_inversions(std::vector<std::size_t> sequence) {
    std::vector<std::size_t> scratch(sequence.size());
    std::uint64_t inversions = 0;

    const auto merge_count = [&](auto&& self, std::size_t lo, std::size_t hi) -> void {
        if (hi - lo < 2) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        self(self, lo, mid);
        self(self, mid, hi);
        std::size_t i = lo, j = mid, out = lo;
        while (i < mid && j < hi) {
            if (sequence[i] <= sequence[j]) {
                scratch[out++] = sequence[i++];
            } else {
                inversions += mid - i;
                scratch[out++] = sequence[j++];
            }
        }
        while (i < mid) scratch[out++] = sequence[i++];
        while (j < hi) scratch[out++] = sequence[j++];
        std::copy(scratch.begin() + lo, scratch.begin() + hi, sequence.begin() + lo);
    };
    merge_count(merge_count, 0, sequence.size());
    return inversions;
}

double kendall_tau(const Ranking& a, const Ranking& b) {
    if (a.entries.size() != b.entries.size()) throw DocSetMismatchError();
    std::map<std::string, std::size_t> pos_in_b;
    for (std::size_t i = 0; i < b.entries.size(); ++i)
        pos_in_b[b.entries[i].doc_id] = i;
    if (pos_in_b.size() != b.entries.size()) throw DocSetMismatchError();

    std::vector<std::size_t> sequence;
    sequence.reserve(a.entries.size());
    for (const auto& e : a.entries) {
        auto it = pos_in_b.find(e.doc_id);
        if (it == pos_in_b.end()) throw DocSetMismatchError();
        sequence.push_back(it->second);
    }

    const std::size_t m = sequence.size();
    if (m < 2) return 1.0;
    const double pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
    return 1.0 - 2.0 * static_cast<double>(count_inversions(std::move(sequence))) / pairs;
}

Aggregate aggregate_values(const std::vector<double>& values) {
    Aggregate agg;
    agg.count = values.size();
    if (values.empty()) return agg;
    double sum = 0.0;
    for (double v : values) sum += v;
    agg.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return agg;
    double ss = 0.0;
    for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    boost::math::students_t_distribution<double> dist(
        static_cast<double>(values.size() - 1));
    const double t = boost::math::quantile(dist, 0.975);
    agg.ci_half_width = t * agg.stddev / std::sqrt(static_cast<double>(values.size()));
    return agg;
}

void MetricReport::finalize() {
    aggregates.clear();
    for (const auto& [metric, by_query] : per_query) {
        std::vector<double> values;
        values.reserve(by_query.size());
        for (const auto& [qid, v] : by_query) values.push_back(v);
        aggregates[metric] = aggregate_values(values);
    }
}

std::string metric_report_csv(const MetricReport& report) {
    std::ostringstream os;
    char buf[64];
    os << "method,query_id,metric,value\n";
    for (const auto& [metric, by_query] : report.per_query)
        for (const auto& [qid, v] : by_query) {
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            os << report.method << ',' << qid << ',' << metric << ',' << buf << '\n';
        }
    for (const auto& [metric, agg] : report.aggregates) {
        std::snprintf(buf, sizeof(buf), "%.6f", agg.mean);
        os << report.method << ",ALL," << metric << ',' << buf << '\n';
    }
    return os.str();
}

std::string config_fingerprint(const AlgorithmConfig& cfg) {
    std::ostringstream os;
    os << method_name(cfg.method) << ";k=" << cfg.k << ";c=" << cfg.set_size
       << ";w=" << cfg.window << ";s=" << cfg.step << ";r=" << cfg.passes
       << ";prior=" << cfg.use_prior
       << ";mode=" << compare_mode_name(cfg.compare_mode)
       << ";early_exit=" << cfg.bubble_early_exit << ";seed=" << cfg.rng_seed;
    const std::string text = os.str();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace setrank
