#pragma once

#include <string>

#include "segpipe/volume.hpp"

namespace segpipe {

enum class Task { Oars, Gtvs };
enum class Modality { Contrast, Plain };

const char* task_name(Task t);
const char* modality_name(Modality m);
Task task_from_string(const std::string& s);

/// Saturating HU range.
struct IntensityWindow {
  double lo = 0.0;
  double hi = 0.0;
  void validate() const;
  bool operator==(const IntensityWindow&) const = default;
};

/// Default window per task and modality. The values were tuned for
/// head-neck CT and are meant to be overridden from configuration when
/// a dataset needs different ranges.
IntensityWindow default_window(Task task, Modality modality);

/// The four task/modality windows, with defaults from default_window.
class WindowTable {
 public:
  WindowTable();
  IntensityWindow window_for(Task t, Modality m) const;
  void set(Task t, Modality m, IntensityWindow w);

  /// JSON object keyed "oars.contrast", "oars.plain", "gtvs.contrast",
  /// "gtvs.plain"; each value a 2-element [lo, hi] array. Missing keys
  /// keep their defaults.
  static WindowTable from_json_text(const std::string& text);
  std::string to_json_text() const;

  bool operator==(const WindowTable&) const = default;

 private:
  IntensityWindow table_[2][2];
};

/// Clamp every voxel into [w.lo, w.hi]. Geometry and dtype unchanged.
Volume clamp_window(const Volume& v, IntensityWindow w);

/// Normalize to zero mean, unit population standard deviation over the
/// whole volume. Statistics use deterministic pairwise summation in
/// double. Constant volumes (std <= 1e-8) raise
/// DegenerateStatisticsError. Output dtype is float64.
Volume zscore(const Volume& v);

/// Same, with statistics restricted to voxels where mask != 0.
Volume zscore(const Volume& v, const Volume& mask);

struct VolumeStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};
VolumeStats volume_stats(const Volume& v);

}  // namespace segpipe
