#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t total() const { return tp + fp + fn + tn; }
};

/// Voxelwise confusion between two binary masks on the same grid.
ConfusionCounts confusion(const Volume& pred, const Volume& ref);

struct OverlapScores {
  double dice = 0.0, precision = 0.0, recall = 0.0;
};

/// dice = 2tp/(2tp+fp+fn), precision = tp/(tp+fp), recall = tp/(tp+fn).
/// Both masks empty scores 1.0 everywhere; an empty denominator against a
/// nonempty counterpart scores 0.0.
OverlapScores overlap_scores(const ConfusionCounts& c);

/// Exact Euclidean distance (mm, anisotropic spacing) from each voxel
/// center to the nearest foreground voxel center. Zero on foreground.
/// Separable lower-envelope transform; empty masks raise EmptyMaskError.
Volume edt(const Volume& mask);

/// Foreground voxels with a 6-neighbor that is background or outside the
/// grid. Volume-border foreground voxels count as surface.
Volume surface(const Volume& mask);

/// Normalized surface distance at tolerance tau_mm: the fraction of the
/// two boundaries lying within tau of the other boundary, using voxel
/// center distances. Both masks empty scores 1.0, exactly one empty 0.0.
double nsd(const Volume& pred, const Volume& ref, double tau_mm);

struct StructureScore {
  std::int64_t label_id = 0;
  double dice = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double nsd = 0.0;
  double tau_mm = 0.0;
  bool absent_in_both = false;  // scored 1.0 by convention
};

/// Score each requested label of a prediction against a reference.
std::vector<StructureScore> evaluate_case(const Volume& pred, const Volume& ref,
                                          std::span<const std::int64_t> labels,
                                          double tau_mm);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double median = 0.0;
};

Summary summarize(std::vector<double> values);  // EmptyInputError on empty

struct MetricSummary {
  Summary dice, precision, recall, nsd;
};

/// Dice bin counts: >= 0.90, [0.80, 0.90), < 0.80.
struct DiceBins {
  std::uint64_t high = 0, mid = 0, low = 0;
};

struct MetricsAggregate {
  std::map<std::int64_t, MetricSummary> per_label;
  MetricSummary overall;
  DiceBins bins;
  std::uint64_t scored = 0;
};

MetricsAggregate aggregate(std::span<const StructureScore> scores);

/// Full batch report: per-case scores plus the aggregate.
struct CaseScores {
  std::string case_id;
  std::vector<StructureScore> scores;
};

struct MetricsReport {
  double tau_mm = 2.0;
  std::vector<CaseScores> cases;  // sorted by case_id
  MetricsAggregate totals;
};

MetricsReport build_report(std::vector<CaseScores> cases, double tau_mm);

std::string report_json(const MetricsReport& r,
                        const std::map<std::int64_t, std::string>& label_names);
/// case_id,label_id,label_name,dice,precision,recall,nsd; one row per
/// structure per case, sorted, 6 significant digits.
std::string report_csv(const MetricsReport& r,
                       const std::map<std::int64_t, std::string>& label_names);

}  // namespace segpipe
