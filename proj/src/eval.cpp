#include "qbe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "qbe/errors.hpp"

namespace qbe::eval {

void QueryResult::validate() const {
  if (!(search_hours > 0.0))
    throw UsageError("query result: search_hours must be positive");
  for (std::size_t i = 1; i < hits.size(); ++i)
    if (hits[i].score < hits[i - 1].score)
      throw UsageError("query result: hits not sorted by ascending score");
}

double precision_at_10(const QueryResult& r) {
  std::size_t upto = std::min<std::size_t>(10, r.hits.size());
  std::uint32_t correct = 0;
  for (std::size_t i = 0; i < upto; ++i)
    if (r.hits[i].correct) ++correct;
  return static_cast<double>(correct) / 10.0;
}

double figure_of_merit(const QueryResult& r) {
  r.validate();
  if (r.n_true == 0) throw UsageError("figure_of_merit: n_true is zero");
  double recall_sum = 0.0;
  for (std::uint32_t a = 1; a <= 10; ++a) {
    auto allowed = static_cast<std::uint64_t>(
        std::floor(static_cast<double>(a) * r.search_hours));
    std::uint64_t false_alarms = 0;
    std::uint32_t correct = 0;
    for (const auto& hit : r.hits) {
      if (hit.correct) {
        ++correct;
      } else {
        ++false_alarms;
        if (false_alarms > allowed) break;  // the (allowed+1)-th false alarm
      }
    }
    recall_sum += static_cast<double>(correct) / r.n_true;
  }
  return 100.0 * recall_sum / 10.0;
}

double otwv(const QueryResult& r, double beta) {
  r.validate();
  if (r.n_true == 0) throw UsageError("otwv: n_true is zero");
  auto trials = static_cast<double>(std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::floor(3600.0 * r.search_hours)) -
             static_cast<std::int64_t>(r.n_true)));
  double best = 0.0;  // the "accept nothing" threshold
  std::uint32_t correct = 0;
  std::uint64_t false_alarms = 0;
  for (std::size_t i = 0; i < r.hits.size(); ++i) {
    if (r.hits[i].correct)
      ++correct;
    else
      ++false_alarms;
    // Thresholds sit at distinct scores; ties are accepted together.
    if (i + 1 < r.hits.size() && r.hits[i + 1].score == r.hits[i].score)
      continue;
    double twv = static_cast<double>(correct) / r.n_true -
                 beta * static_cast<double>(false_alarms) / trials;
    best = std::max(best, twv);
  }
  return best;
}

AggregateScores aggregate(
    const std::map<std::string, std::vector<double>>& per_example_scores) {
  if (per_example_scores.empty())
    throw UsageError("aggregate: no query types");
  double median_sum = 0.0, max_sum = 0.0;
  for (const auto& [type, scores] : per_example_scores) {
    if (scores.empty())
      throw UsageError("aggregate: type " + type + " has no example scores");
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    double median = (n % 2 == 1)
                        ? sorted[n / 2]
                        : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    median_sum += median;
    max_sum += sorted.back();
  }
  auto types = static_cast<double>(per_example_scores.size());
  return {median_sum / types, max_sum / types};
}

double same_different_ap(const std::vector<std::pair<double, bool>>& pairs) {
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pairs[a].first < pairs[b].first;
  });
  std::size_t same_seen = 0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (pairs[order[rank]].second) {
      ++same_seen;
      precision_sum +=
          static_cast<double>(same_seen) / static_cast<double>(rank + 1);
    }
  }
  if (same_seen == 0) throw UsageError("same_different_ap: no same pairs");
  return precision_sum / static_cast<double>(same_seen);
}

Report build_report(const std::vector<QueryResult>& results,
                    const ReportOptions& opts) {
  if (results.empty()) throw UsageError("report: no query results");
  Report report;
  for (const auto& r : results) {
    report.fom[r.query_type].push_back(figure_of_merit(r));
    report.otwv_scores[r.query_type].push_back(otwv(r, opts.otwv_beta));
    report.p_at_10[r.query_type].push_back(precision_at_10(r));
  }
  report.fom_summary = aggregate(report.fom);
  report.otwv_summary = aggregate(report.otwv_scores);
  report.p10_summary = aggregate(report.p_at_10);
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_metric_rows(std::ofstream& out, const char* name,
                       const std::map<std::string, std::vector<double>>& rows) {
  for (const auto& [type, scores] : rows) {
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    double median = (n % 2 == 1)
                        ? sorted[n / 2]
                        : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    out << type << '\t' << name << '\t' << fmt(median) << '\t'
        << fmt(sorted.back()) << '\n';
  }
}

}  // namespace

void write_report(const Report& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# query_type\tmetric\tmedian\tmax\n";
  write_metric_rows(out, "fom", report.fom);
  write_metric_rows(out, "otwv", report.otwv_scores);
  write_metric_rows(out, "p_at_10", report.p_at_10);
  out << "# summary\tfom_med\totwv_med\tp10_med\tfom_best\totwv_best\tp10_best\n";
  out << "summary\t" << fmt(report.fom_summary.mean_of_medians) << '\t'
      << fmt(report.otwv_summary.mean_of_medians) << '\t'
      << fmt(report.p10_summary.mean_of_medians) << '\t'
      << fmt(report.fom_summary.mean_of_maxima) << '\t'
      << fmt(report.otwv_summary.mean_of_maxima) << '\t'
      << fmt(report.p10_summary.mean_of_maxima) << '\n';
  out.close();
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace qbe::eval
