#pragma once

#include <string>
#include <vector>

#include "hatesense/text.hpp"

namespace hatesense {

struct GroupAccuracy {
  std::string group;
  double accuracy = 0.0;
  std::size_t test_count = 0;
  std::size_t correct = 0;
  std::size_t train_count = 0;
};

struct AggregateStats {
  double average = 0.0;     // unweighted mean of per-group accuracies
  double dispersion = 0.0;  // sample standard deviation of the same list
  std::string min_group;
  double min_accuracy = 0.0;
};

struct OverlapStat {
  std::string group;
  std::size_t k_used = 0;
  double fraction = 0.0;  // |top-K(group) ∩ top-K(rest)| / K
};

struct AuditConfig {
  std::size_t min_test_count = 25;
  std::size_t overlap_k = 100;
};

struct BiasReport {
  std::vector<GroupAccuracy> groups;  // sorted by group name
  double overall_accuracy = 0.0;
  std::size_t test_total = 0;
  AggregateStats aggregate;
  std::vector<OverlapStat> overlaps;
  std::size_t min_test_count = 25;
  std::size_t overlap_k = 100;
  // Test examples annotated with more than one group (they count toward
  // each of their groups).
  std::size_t multi_group_test_examples = 0;
};

// predictions[i] is the predicted class index for the i-th test example in
// corpus order and must cover the whole test split. An example counts
// toward every group it is annotated with; groups under min_test_count are
// dropped.
std::vector<GroupAccuracy> per_group_accuracy(
    const std::vector<std::size_t>& predictions, const GroupedCorpus& corpus,
    std::size_t min_test_count);

double mean_of(const std::vector<double>& values);
// Sample standard deviation (n-1); 0 for a single value. This is the
// figure reported as "Performance Variance" in the audit output.
double dispersion_of(const std::vector<double>& values);

AggregateStats aggregate(const std::vector<std::pair<std::string, double>>&
                             group_accuracies);

// Fraction of the group's top-K train tokens shared with the top-K tokens
// of the rest of the train split. The top-20 corpus-wide tokens are treated
// as stopwords and removed first; K shrinks when a side has fewer distinct
// tokens.
OverlapStat word_overlap(const GroupedCorpus& corpus, const std::string& group,
                         std::size_t k);

BiasReport build_report(const std::vector<std::size_t>& predictions,
                        const GroupedCorpus& corpus, const AuditConfig& config);

struct GroupDelta {
  std::string group;
  double baseline = 0.0;
  double method = 0.0;
  double delta = 0.0;
};

struct ReportComparison {
  std::vector<GroupDelta> groups;
  double average_delta = 0.0;
  double dispersion_delta = 0.0;
  double overall_delta = 0.0;
  double min_accuracy_delta = 0.0;
  std::string baseline_min_group, method_min_group;
  double baseline_min_accuracy = 0.0, method_min_accuracy = 0.0;
  bool average_improved = false;
  bool dispersion_reduced = false;
};

// Requires the two reports to cover the same group set.
ReportComparison compare_reports(const BiasReport& baseline,
                                 const BiasReport& method);

// One-line JSON object, the same conventions as the corpus format.
std::string report_to_json(const BiasReport& report);
BiasReport report_from_json(const std::string& text);
void save_report(const BiasReport& report, const std::string& path);
BiasReport load_report(const std::string& path);

std::string comparison_to_json(const ReportComparison& comparison);
void save_comparison(const ReportComparison& comparison, const std::string& path);

// Human-readable table.
std::string render_report(const BiasReport& report);
std::string render_comparison(const ReportComparison& comparison);

// Static per-group accuracy bar chart.
void write_bar_chart_svg(const BiasReport& report, const std::string& path);

}  // namespace hatesense
