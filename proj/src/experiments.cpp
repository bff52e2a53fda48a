#include "hatesense/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace hatesense {

void apply_mode(const std::string& mode, ModelConfig& model,
                TrainConfig& train_config) {
  if (mode == "baseline") {
    model.sense_augmentation = false;
    train_config.weights.consensus = 0.0;
    train_config.weights.unique = 0.0;
  } else if (mode == "sense") {
    model.sense_augmentation = true;
  } else {
    throw std::invalid_argument("unknown mode \"" + mode +
                                "\" (expected baseline or sense)");
  }
}

void ExperimentSpec::validate() const {
  classes.validate();
  train_config.validate();
  if (seeds.size() < 3) {
    throw std::invalid_argument(
        "experiment needs at least 3 seeds for aggregated claims");
  }
}

double median(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("median: empty list");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void recompute_flags(ExperimentSummary& summary) {
  std::vector<double> dispersion_deltas, average_deltas, overall_deltas,
      min_deltas;
  for (const SeedOutcome& run : summary.runs) {
    dispersion_deltas.push_back(run.comparison.dispersion_delta);
    average_deltas.push_back(run.comparison.average_delta);
    overall_deltas.push_back(run.comparison.overall_delta);
    min_deltas.push_back(run.comparison.min_accuracy_delta);
  }
  summary.median_dispersion_delta = median(dispersion_deltas);
  summary.median_average_delta = median(average_deltas);
  summary.median_overall_delta = median(overall_deltas);
  summary.median_min_accuracy_delta = median(min_deltas);
  summary.dispersion_reduced = summary.median_dispersion_delta < 0.0;
  summary.average_improved = summary.median_average_delta > 0.0;
  summary.overall_within_tolerance =
      std::abs(summary.median_overall_delta) <= summary.overall_tolerance;
}

namespace {

BiasReport run_once(const ExperimentSpec& spec, const GroupedCorpus& corpus,
                    const Vocabulary& vocab, const std::string& mode,
                    std::uint64_t seed) {
  ModelConfig model = spec.model;
  TrainConfig train_config = spec.train_config;
  apply_mode(mode, model, train_config);
  model.encoder.seed = seed;
  train_config.seed = seed;
  TrainResult trained = train(corpus, spec.classes, vocab, model, train_config);
  const std::vector<std::size_t> predictions = predict_split(
      trained.params, trained.config, spec.classes, vocab, corpus, Split::kTest);
  return build_report(predictions, corpus, spec.audit);
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

}  // namespace

ExperimentSummary run_dispersion_experiment(const ExperimentSpec& spec,
                                            const GroupedCorpus& corpus) {
  spec.validate();
  ensure_dir(spec.out_dir);
  // One vocabulary for every run keeps the two modes comparable.
  const Vocabulary vocab =
      Vocabulary::build(corpus, spec.model.max_vocab, spec.classes.names);

  ExperimentSummary summary;
  summary.overall_tolerance = spec.overall_tolerance;
  for (std::uint64_t seed : spec.seeds) {
    SeedOutcome outcome;
    outcome.seed = seed;
    outcome.report_a = run_once(spec, corpus, vocab, spec.mode_a, seed);
    outcome.report_b = run_once(spec, corpus, vocab, spec.mode_b, seed);
    outcome.comparison = compare_reports(outcome.report_a, outcome.report_b);
    if (!spec.out_dir.empty()) {
      save_report(outcome.report_a, spec.out_dir + "/" + spec.mode_a + "_seed" +
                                        std::to_string(seed) + ".json");
      save_report(outcome.report_b, spec.out_dir + "/" + spec.mode_b + "_seed" +
                                        std::to_string(seed) + ".json");
      save_comparison(outcome.comparison,
                      spec.out_dir + "/compare_seed" + std::to_string(seed) +
                          ".json");
    }
    summary.runs.push_back(std::move(outcome));
  }
  recompute_flags(summary);
  if (!spec.out_dir.empty()) {
    save_summary(summary, spec.out_dir + "/summary.json");
  }
  return summary;
}

CurveArtifact run_fig3_curve(const ExperimentSpec& spec,
                             const GroupedCorpus& corpus,
                             const std::string& group,
                             const std::vector<std::size_t>& sizes,
                             const std::string& mode) {
  spec.validate();
  ensure_dir(spec.out_dir);
  CurveArtifact curve;
  curve.group = group;
  curve.mode = mode;
  curve.sizes = sizes;
  for (std::uint64_t seed : spec.seeds) {
    ModelConfig model = spec.model;
    TrainConfig train_config = spec.train_config;
    apply_mode(mode, model, train_config);
    model.encoder.seed = seed;
    train_config.seed = seed;
    CurveSeries series;
    series.seed = seed;
    series.points = subset_experiment(corpus, spec.classes, group, sizes, model,
                                      train_config, spec.audit.min_test_count);
    curve.series.push_back(std::move(series));
  }
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    std::vector<double> accs;
    for (const CurveSeries& series : curve.series) {
      const SubsetPoint& point = series.points[s];
      auto it = std::find_if(
          point.group_accuracy.begin(), point.group_accuracy.end(),
          [&](const auto& entry) { return entry.first == group; });
      if (it == point.group_accuracy.end()) {
        throw std::runtime_error(
            "curve: group \"" + group +
            "\" fell below the audit test-count threshold; lower "
            "min_test_count or enlarge the test split");
      }
      accs.push_back(it->second);
    }
    curve.median_group_accuracy.push_back(median(accs));
  }
  if (!spec.out_dir.empty()) {
    save_curve(curve, spec.out_dir + "/curve_" + group + "_" + mode + ".json");
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string summary_to_json(const ExperimentSummary& summary) {
  nlohmann::json j;
  nlohmann::json runs = nlohmann::json::array();
  for (const SeedOutcome& run : summary.runs) {
    runs.push_back({{"seed", run.seed},
                    {"baseline", nlohmann::json::parse(report_to_json(run.report_a))},
                    {"method", nlohmann::json::parse(report_to_json(run.report_b))},
                    {"comparison",
                     nlohmann::json::parse(comparison_to_json(run.comparison))}});
  }
  j["runs"] = std::move(runs);
  j["median_dispersion_delta"] = summary.median_dispersion_delta;
  j["median_average_delta"] = summary.median_average_delta;
  j["median_overall_delta"] = summary.median_overall_delta;
  j["median_min_accuracy_delta"] = summary.median_min_accuracy_delta;
  j["overall_tolerance"] = summary.overall_tolerance;
  j["dispersion_reduced"] = summary.dispersion_reduced;
  j["average_improved"] = summary.average_improved;
  j["overall_within_tolerance"] = summary.overall_within_tolerance;
  j["passed"] = summary.passed();
  return j.dump();
}

void save_summary(const ExperimentSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write summary file: " + path);
  }
  out << summary_to_json(summary) << "\n";
}

std::string curve_to_json(const CurveArtifact& curve) {
  nlohmann::json j;
  j["group"] = curve.group;
  j["mode"] = curve.mode;
  j["sizes"] = curve.sizes;
  nlohmann::json series = nlohmann::json::array();
  for (const CurveSeries& s : curve.series) {
    nlohmann::json points = nlohmann::json::array();
    for (const SubsetPoint& p : s.points) {
      nlohmann::json groups = nlohmann::json::object();
      for (const auto& [name, acc] : p.group_accuracy) groups[name] = acc;
      points.push_back({{"size", p.size},
                        {"group_accuracy", std::move(groups)},
                        {"overall_accuracy", p.overall_accuracy}});
    }
    series.push_back({{"seed", s.seed}, {"points", std::move(points)}});
  }
  j["series"] = std::move(series);
  j["median_group_accuracy"] = curve.median_group_accuracy;
  return j.dump();
}

void save_curve(const CurveArtifact& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write curve file: " + path);
  }
  out << curve_to_json(curve) << "\n";
}

void write_curve_svg(const CurveArtifact& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write curve chart: " + path);
  }
  const double width = 640.0, height = 360.0;
  const double ml = 60.0, mb = 50.0, mt = 20.0, mr = 20.0;
  const double plot_w = width - ml - mr;
  const double plot_h = height - mt - mb;
  const double max_size = curve.sizes.empty()
                              ? 1.0
                              : static_cast<double>(curve.sizes.back());
  auto x_of = [&](std::size_t size) {
    return ml + (max_size > 0.0
                     ? plot_w * static_cast<double>(size) / max_size
                     : 0.0);
  };
  auto y_of = [&](double acc) { return mt + plot_h * (1.0 - acc); };

  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = y_of(frac);
    out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + plot_w
        << "\" y2=\"" << y << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << frac << "</text>\n";
  }
  auto polyline = [&](const std::vector<double>& accs, const char* color,
                      double stroke) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
        << stroke << "\" points=\"";
    for (std::size_t i = 0; i < curve.sizes.size() && i < accs.size(); ++i)
      out << x_of(curve.sizes[i]) << "," << y_of(accs[i]) << " ";
    out << "\"/>\n";
  };
  for (const CurveSeries& s : curve.series) {
    std::vector<double> accs;
    for (const SubsetPoint& p : s.points) {
      auto it = std::find_if(
          p.group_accuracy.begin(), p.group_accuracy.end(),
          [&](const auto& entry) { return entry.first == curve.group; });
      accs.push_back(it == p.group_accuracy.end() ? 0.0 : it->second);
    }
    polyline(accs, "#99bbdd", 1.0);
  }
  polyline(curve.median_group_accuracy, "#224477", 2.5);
  for (std::size_t size : curve.sizes) {
    out << "<text x=\"" << x_of(size) << "\" y=\"" << mt + plot_h + 16
        << "\" font-size=\"11\" text-anchor=\"middle\">" << size << "</text>\n";
  }
  out << "<text x=\"" << ml + plot_w / 2.0 << "\" y=\"" << height - 8
      << "\" font-size=\"12\" text-anchor=\"middle\">\"" << curve.group
      << "\" training examples vs accuracy (" << curve.mode << ")</text>\n";
  out << "</svg>\n";
}

}  // namespace hatesense
