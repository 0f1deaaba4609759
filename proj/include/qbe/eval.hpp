#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace qbe::eval {

struct ScoredHit {
  double score = 0.0;  // ascending = better
  bool correct = false;
};

// One query example's labeled result list.
struct QueryResult {
  std::string query_type;
  std::string example_id;
  std::vector<ScoredHit> hits;  // sorted by ascending score
  std::uint32_t n_true = 0;
  double search_hours = 0.0;

  void validate() const;
};

// (#correct among the first 10 hits) / 10; missing slots count as incorrect.
double precision_at_10(const QueryResult& r);

// Recall averaged over operating points of 1..10 allowed false alarms per
// hour of search audio, as a percentage. Requires n_true >= 1.
double figure_of_merit(const QueryResult& r);

// Best threshold value of recall(theta) - beta * P_FA(theta), thresholds at
// every distinct hit score plus "accept nothing". P_FA is per 1-second trial:
// denominator max(1, floor(3600 * search_hours) - n_true).
double otwv(const QueryResult& r, double beta = 999.9);

// Per type: median (even count: mean of the middle two) and maximum over the
// example scores; then the unweighted mean of each across types.
struct AggregateScores {
  double mean_of_medians = 0.0;
  double mean_of_maxima = 0.0;
};
AggregateScores aggregate(
    const std::map<std::string, std::vector<double>>& per_example_scores);

// Average precision of retrieving same-word pairs when ranked by ascending
// distance; ties keep input order. Requires at least one same pair.
double same_different_ap(const std::vector<std::pair<double, bool>>& pairs);

// Metrics report, UTF-8 TSV: one row per (query type, metric) with the
// median and max over that type's examples, then a summary row with the
// across-type means laid out as
//   summary <TAB> fom_med otwv_med p10_med fom_best otwv_best p10_best
struct ReportOptions {
  double otwv_beta = 999.9;
};
struct Report {
  std::map<std::string, std::vector<double>> fom, otwv_scores, p_at_10;
  AggregateScores fom_summary, otwv_summary, p10_summary;
};
Report build_report(const std::vector<QueryResult>& results,
                    const ReportOptions& opts);
void write_report(const Report& report, const std::string& path);

}  // namespace qbe::eval
