#include "hatesense/audit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace hatesense {

std::vector<GroupAccuracy> per_group_accuracy(
    const std::vector<std::size_t>& predictions, const GroupedCorpus& corpus,
    std::size_t min_test_count) {
  const std::vector<std::size_t> test_indices =
      corpus.split_indices(Split::kTest);
  if (predictions.size() != test_indices.size()) {
    throw std::invalid_argument(
        "per_group_accuracy: " + std::to_string(predictions.size()) +
        " predictions for " + std::to_string(test_indices.size()) +
        " test examples");
  }
  struct Tally {
    std::size_t total = 0;
    std::size_t correct = 0;
  };
  std::map<std::string, Tally> tallies;
  for (std::size_t i = 0; i < test_indices.size(); ++i) {
    const Example& ex = corpus.examples()[test_indices[i]];
    const bool correct = predictions[i] == corpus.label_index(ex.label);
    for (const std::string& group : ex.groups) {
      Tally& t = tallies[group];
      ++t.total;
      if (correct) ++t.correct;
    }
  }
  std::vector<GroupAccuracy> out;
  for (const auto& [group, tally] : tallies) {
    if (tally.total < min_test_count) continue;
    GroupAccuracy g;
    g.group = group;
    g.test_count = tally.total;
    g.correct = tally.correct;
    g.accuracy = static_cast<double>(tally.correct) /
                 static_cast<double>(tally.total);
    g.train_count = corpus.group_count(group, Split::kTrain);
    out.push_back(std::move(g));
  }
  return out;  // std::map iteration -> sorted by group name
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) {
    throw std::invalid_argument("mean_of: empty list");
  }
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double dispersion_of(const std::vector<double>& values) {
  if (values.empty()) {
    throw std::invalid_argument("dispersion_of: empty list");
  }
  if (values.size() == 1) return 0.0;
  const double mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

AggregateStats aggregate(
    const std::vector<std::pair<std::string, double>>& group_accuracies) {
  if (group_accuracies.empty()) {
    throw std::invalid_argument("aggregate: no group accuracies");
  }
  std::vector<double> values;
  values.reserve(group_accuracies.size());
  for (const auto& [group, acc] : group_accuracies) values.push_back(acc);
  AggregateStats stats;
  stats.average = mean_of(values);
  stats.dispersion = dispersion_of(values);
  stats.min_group = group_accuracies.front().first;
  stats.min_accuracy = group_accuracies.front().second;
  for (const auto& [group, acc] : group_accuracies) {
    if (acc < stats.min_accuracy ||
        (acc == stats.min_accuracy && group < stats.min_group)) {
      stats.min_group = group;
      stats.min_accuracy = acc;
    }
  }
  return stats;
}

namespace {

// Token frequencies over the train split, restricted to the given examples.
std::map<std::string, std::size_t> count_tokens(
    const GroupedCorpus& corpus, const std::vector<std::size_t>& indices) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t idx : indices) {
    for (const std::string& token : tokenize(corpus.examples()[idx].text))
      ++counts[token];
  }
  return counts;
}

std::vector<std::string> top_tokens(
    const std::map<std::string, std::size_t>& counts, std::size_t k,
    const std::unordered_set<std::string>& stopwords) {
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [token, count] : counts) {
    if (stopwords.count(token)) continue;
    ranked.emplace_back(token, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > k) ranked.resize(k);
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (const auto& [token, count] : ranked) out.push_back(token);
  return out;
}

}  // namespace

OverlapStat word_overlap(const GroupedCorpus& corpus, const std::string& group,
                         std::size_t k) {
  if (k == 0) {
    throw std::invalid_argument("word_overlap: K must be >= 1");
  }
  auto it = corpus.group_index().find(group);
  if (it == corpus.group_index().end()) {
    throw std::invalid_argument("word_overlap: unknown group \"" + group + "\"");
  }
  std::vector<std::size_t> group_train, rest_train;
  std::unordered_set<std::size_t> in_group(it->second.begin(), it->second.end());
  for (std::size_t i = 0; i < corpus.examples().size(); ++i) {
    if (corpus.examples()[i].split != Split::kTrain) continue;
    (in_group.count(i) ? group_train : rest_train).push_back(i);
  }
  if (group_train.empty()) {
    throw std::invalid_argument("word_overlap: group \"" + group +
                                "\" has no train examples");
  }

  // Corpus-wide function words: the 20 most frequent train tokens.
  std::vector<std::size_t> all_train;
  all_train.reserve(group_train.size() + rest_train.size());
  all_train.insert(all_train.end(), group_train.begin(), group_train.end());
  all_train.insert(all_train.end(), rest_train.begin(), rest_train.end());
  const auto corpus_counts = count_tokens(corpus, all_train);
  const auto stopword_list = top_tokens(corpus_counts, 20, {});
  std::unordered_set<std::string> stopwords(stopword_list.begin(),
                                            stopword_list.end());

  const auto group_top = top_tokens(count_tokens(corpus, group_train), k, stopwords);
  const auto rest_top = top_tokens(count_tokens(corpus, rest_train), k, stopwords);
  const std::size_t k_used =
      std::min({k, group_top.size(), rest_top.size()});

  OverlapStat stat;
  stat.group = group;
  stat.k_used = k_used;
  if (k_used == 0) {
    stat.fraction = 0.0;
    return stat;
  }
  std::set<std::string> group_set(group_top.begin(),
                                  group_top.begin() + std::min(k_used, group_top.size()));
  std::size_t shared = 0;
  for (std::size_t i = 0; i < std::min(k_used, rest_top.size()); ++i)
    if (group_set.count(rest_top[i])) ++shared;
  stat.fraction = static_cast<double>(shared) / static_cast<double>(k_used);
  return stat;
}

BiasReport build_report(const std::vector<std::size_t>& predictions,
                        const GroupedCorpus& corpus, const AuditConfig& config) {
  BiasReport report;
  report.min_test_count = config.min_test_count;
  report.overlap_k = config.overlap_k;
  report.groups = per_group_accuracy(predictions, corpus, config.min_test_count);

  const std::vector<std::size_t> test_indices =
      corpus.split_indices(Split::kTest);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_indices.size(); ++i) {
    const Example& ex = corpus.examples()[test_indices[i]];
    if (predictions[i] == corpus.label_index(ex.label)) ++correct;
    if (ex.groups.size() > 1) ++report.multi_group_test_examples;
  }
  report.test_total = test_indices.size();
  report.overall_accuracy =
      test_indices.empty()
          ? 0.0
          : static_cast<double>(correct) / static_cast<double>(test_indices.size());

  if (!report.groups.empty()) {
    std::vector<std::pair<std::string, double>> accs;
    for (const GroupAccuracy& g : report.groups)
      accs.emplace_back(g.group, g.accuracy);
    report.aggregate = aggregate(accs);
  }
  for (const GroupAccuracy& g : report.groups) {
    if (corpus.group_count(g.group, Split::kTrain) == 0) {
      OverlapStat stat;
      stat.group = g.group;
      stat.k_used = 0;
      stat.fraction = 0.0;
      report.overlaps.push_back(stat);
    } else {
      report.overlaps.push_back(word_overlap(corpus, g.group, config.overlap_k));
    }
  }
  return report;
}

ReportComparison compare_reports(const BiasReport& baseline,
                                 const BiasReport& method) {
  if (baseline.groups.size() != method.groups.size()) {
    throw std::invalid_argument("compare_reports: group sets differ in size");
  }
  ReportComparison cmp;
  for (std::size_t i = 0; i < baseline.groups.size(); ++i) {
    if (baseline.groups[i].group != method.groups[i].group) {
      throw std::invalid_argument("compare_reports: group sets differ (\"" +
                                  baseline.groups[i].group + "\" vs \"" +
                                  method.groups[i].group + "\")");
    }
    GroupDelta d;
    d.group = baseline.groups[i].group;
    d.baseline = baseline.groups[i].accuracy;
    d.method = method.groups[i].accuracy;
    d.delta = d.method - d.baseline;
    cmp.groups.push_back(std::move(d));
  }
  cmp.average_delta = method.aggregate.average - baseline.aggregate.average;
  cmp.dispersion_delta =
      method.aggregate.dispersion - baseline.aggregate.dispersion;
  cmp.overall_delta = method.overall_accuracy - baseline.overall_accuracy;
  cmp.min_accuracy_delta =
      method.aggregate.min_accuracy - baseline.aggregate.min_accuracy;
  cmp.baseline_min_group = baseline.aggregate.min_group;
  cmp.method_min_group = method.aggregate.min_group;
  cmp.baseline_min_accuracy = baseline.aggregate.min_accuracy;
  cmp.method_min_accuracy = method.aggregate.min_accuracy;
  cmp.average_improved = cmp.average_delta > 0.0;
  cmp.dispersion_reduced = cmp.dispersion_delta < 0.0;
  return cmp;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string report_to_json(const BiasReport& report) {
  nlohmann::json j;
  nlohmann::json groups = nlohmann::json::array();
  for (const GroupAccuracy& g : report.groups) {
    groups.push_back({{"group", g.group},
                      {"accuracy", g.accuracy},
                      {"test_count", g.test_count},
                      {"correct", g.correct},
                      {"train_count", g.train_count}});
  }
  j["groups"] = std::move(groups);
  j["overall_accuracy"] = report.overall_accuracy;
  j["test_total"] = report.test_total;
  j["average_across_groups"] = report.aggregate.average;
  // The paper's tables label this row "Performance Variance".
  j["dispersion"] = report.aggregate.dispersion;
  j["min_group"] = report.aggregate.min_group;
  j["min_accuracy"] = report.aggregate.min_accuracy;
  nlohmann::json overlaps = nlohmann::json::array();
  for (const OverlapStat& o : report.overlaps) {
    overlaps.push_back({{"group", o.group},
                        {"k_used", o.k_used},
                        {"fraction", o.fraction}});
  }
  j["word_overlap"] = std::move(overlaps);
  j["min_test_count"] = report.min_test_count;
  j["overlap_k"] = report.overlap_k;
  j["multi_group_test_examples"] = report.multi_group_test_examples;
  return j.dump();
}

BiasReport report_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  BiasReport report;
  for (const auto& g : j.at("groups")) {
    GroupAccuracy ga;
    ga.group = g.at("group").get<std::string>();
    ga.accuracy = g.at("accuracy").get<double>();
    ga.test_count = g.at("test_count").get<std::size_t>();
    ga.correct = g.at("correct").get<std::size_t>();
    ga.train_count = g.at("train_count").get<std::size_t>();
    report.groups.push_back(std::move(ga));
  }
  report.overall_accuracy = j.at("overall_accuracy").get<double>();
  report.test_total = j.at("test_total").get<std::size_t>();
  report.aggregate.average = j.at("average_across_groups").get<double>();
  report.aggregate.dispersion = j.at("dispersion").get<double>();
  report.aggregate.min_group = j.at("min_group").get<std::string>();
  report.aggregate.min_accuracy = j.at("min_accuracy").get<double>();
  for (const auto& o : j.at("word_overlap")) {
    OverlapStat os;
    os.group = o.at("group").get<std::string>();
    os.k_used = o.at("k_used").get<std::size_t>();
    os.fraction = o.at("fraction").get<double>();
    report.overlaps.push_back(std::move(os));
  }
  report.min_test_count = j.at("min_test_count").get<std::size_t>();
  report.overlap_k = j.at("overlap_k").get<std::size_t>();
  report.multi_group_test_examples =
      j.at("multi_group_test_examples").get<std::size_t>();
  return report;
}

void save_report(const BiasReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write report file: " + path);
  }
  out << report_to_json(report) << "\n";
}

BiasReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open report file: " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw std::runtime_error("empty report file: " + path);
  }
  return report_from_json(line);
}

std::string comparison_to_json(const ReportComparison& cmp) {
  nlohmann::json j;
  nlohmann::json groups = nlohmann::json::array();
  for (const GroupDelta& g : cmp.groups) {
    groups.push_back({{"group", g.group},
                      {"baseline", g.baseline},
                      {"method", g.method},
                      {"delta", g.delta}});
  }
  j["groups"] = std::move(groups);
  j["average_delta"] = cmp.average_delta;
  j["dispersion_delta"] = cmp.dispersion_delta;
  j["overall_delta"] = cmp.overall_delta;
  j["min_accuracy_delta"] = cmp.min_accuracy_delta;
  j["baseline_min_group"] = cmp.baseline_min_group;
  j["method_min_group"] = cmp.method_min_group;
  j["baseline_min_accuracy"] = cmp.baseline_min_accuracy;
  j["method_min_accuracy"] = cmp.method_min_accuracy;
  j["average_improved"] = cmp.average_improved;
  j["dispersion_reduced"] = cmp.dispersion_reduced;
  return j.dump();
}

void save_comparison(const ReportComparison& cmp, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write comparison file: " + path);
  }
  out << comparison_to_json(cmp) << "\n";
}

std::string render_report(const BiasReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "group                       train   test    accuracy  overlap\n";
  std::unordered_map<std::string, double> overlap;
  for (const OverlapStat& o : report.overlaps) overlap[o.group] = o.fraction;
  for (const GroupAccuracy& g : report.groups) {
    out << std::left << std::setw(28) << g.group << std::right << std::setw(5)
        << g.train_count << std::setw(7) << g.test_count << std::setw(12)
        << g.accuracy << std::setw(9) << overlap[g.group] << "\n";
  }
  out << "\n";
  out << "overall test accuracy       " << report.overall_accuracy << "\n";
  out << "average (across groups)     " << report.aggregate.average << "\n";
  out << "dispersion (perf. variance) " << report.aggregate.dispersion << "\n";
  out << "lowest group                " << report.aggregate.min_group << " ("
      << report.aggregate.min_accuracy << ")\n";
  return out.str();
}

std::string render_comparison(const ReportComparison& cmp) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "group                       baseline  method    delta\n";
  for (const GroupDelta& g : cmp.groups) {
    out << std::left << std::setw(28) << g.group << std::right << std::setw(8)
        << g.baseline << std::setw(10) << g.method << std::setw(9) << g.delta
        << "\n";
  }
  out << "\n";
  out << "average delta      " << cmp.average_delta
      << (cmp.average_improved ? "  (improved)" : "") << "\n";
  out << "dispersion delta   " << cmp.dispersion_delta
      << (cmp.dispersion_reduced ? "  (reduced)" : "") << "\n";
  out << "overall delta      " << cmp.overall_delta << "\n";
  out << "lowest group       " << cmp.baseline_min_group << " ("
      << cmp.baseline_min_accuracy << ") -> " << cmp.method_min_group << " ("
      << cmp.method_min_accuracy << ")\n";
  return out.str();
}

void write_bar_chart_svg(const BiasReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write chart file: " + path);
  }
  const std::size_t n = report.groups.size();
  const double width = 640.0, height = 360.0;
  const double margin_left = 60.0, margin_bottom = 90.0, margin_top = 20.0;
  const double plot_w = width - margin_left - 20.0;
  const double plot_h = height - margin_top - margin_bottom;
  const double bar_w = n > 0 ? plot_w / static_cast<double>(n) : plot_w;

  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = margin_top + plot_h * (1.0 - frac);
    out << "<line x1=\"" << margin_left << "\" y1=\"" << y << "\" x2=\""
        << margin_left + plot_w << "\" y2=\"" << y
        << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << margin_left - 8 << "\" y=\"" << y + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << frac << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const GroupAccuracy& g = report.groups[i];
    const double h = plot_h * g.accuracy;
    const double x = margin_left + bar_w * static_cast<double>(i) + bar_w * 0.15;
    const double y = margin_top + plot_h - h;
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w * 0.7
        << "\" height=\"" << h << "\" fill=\"#4477aa\"/>\n";
    out << "<text x=\"" << x + bar_w * 0.35 << "\" y=\""
        << margin_top + plot_h + 12 << "\" font-size=\"11\" text-anchor=\"end\""
        << " transform=\"rotate(-45 " << x + bar_w * 0.35 << " "
        << margin_top + plot_h + 12 << ")\">" << g.group << "</text>\n";
  }
  out << "<text x=\"" << margin_left + plot_w / 2.0 << "\" y=\"" << height - 6
      << "\" font-size=\"12\" text-anchor=\"middle\">per-group test accuracy"
      << "</text>\n";
  out << "</svg>\n";
}

}  // namespace hatesense
