#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hatesense/audit.hpp"
#include "hatesense/sense.hpp"
#include "hatesense/train.hpp"

namespace hatesense {

// "baseline" turns sense augmentation off and zeroes the auxiliary loss
// weights; "sense" leaves the configured weights in place.
void apply_mode(const std::string& mode, ModelConfig& model,
                TrainConfig& train_config);

struct ExperimentSpec {
  ClassSet classes;
  ModelConfig model;
  TrainConfig train_config;
  AuditConfig audit;
  std::vector<std::uint64_t> seeds;  // >= 3 for aggregated claims
  std::string mode_a = "baseline";
  std::string mode_b = "sense";
  std::string out_dir;  // empty -> keep results in memory only
  double overall_tolerance = 0.03;

  void validate() const;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  BiasReport report_a;
  BiasReport report_b;
  ReportComparison comparison;  // b relative to a
};

struct ExperimentSummary {
  std::vector<SeedOutcome> runs;
  double median_dispersion_delta = 0.0;
  double median_average_delta = 0.0;
  double median_overall_delta = 0.0;
  double median_min_accuracy_delta = 0.0;
  double overall_tolerance = 0.03;
  bool dispersion_reduced = false;
  bool average_improved = false;
  bool overall_within_tolerance = false;

  bool passed() const {
    return dispersion_reduced && average_improved && overall_within_tolerance;
  }
};

double median(std::vector<double> values);

// Recomputes the three flags from the stored per-seed reports; the summary
// must carry exactly these values.
void recompute_flags(ExperimentSummary& summary);

// Trains both modes per seed on the same corpus and splits, audits each,
// and aggregates median deltas of mode_b relative to mode_a.
ExperimentSummary run_dispersion_experiment(const ExperimentSpec& spec,
                                            const GroupedCorpus& corpus);

struct CurveSeries {
  std::uint64_t seed = 0;
  std::vector<SubsetPoint> points;
};

struct CurveArtifact {
  std::string group;
  std::string mode;
  std::vector<std::size_t> sizes;
  std::vector<CurveSeries> series;
  std::vector<double> median_group_accuracy;  // one entry per size
};

// Subset-size curve for one group: per-seed series plus the median series.
CurveArtifact run_fig3_curve(const ExperimentSpec& spec,
                             const GroupedCorpus& corpus,
                             const std::string& group,
                             const std::vector<std::size_t>& sizes,
                             const std::string& mode);

std::string summary_to_json(const ExperimentSummary& summary);
void save_summary(const ExperimentSummary& summary, const std::string& path);

std::string curve_to_json(const CurveArtifact& curve);
void save_curve(const CurveArtifact& curve, const std::string& path);
void write_curve_svg(const CurveArtifact& curve, const std::string& path);

}  // namespace hatesense
