#include "segpipe/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

namespace segpipe {

namespace {

// Deterministic pairwise reduction; result does not depend on chunking
// done by callers because there is none.
double pairwise_sum(const std::function<double(std::size_t)>& get, std::size_t lo,
                    std::size_t hi) {
  if (hi - lo <= 64) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += get(i);
    return s;
  }
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(get, lo, mid) + pairwise_sum(get, mid, hi);
}

constexpr double kMinStd = 1e-8;

Volume zscore_impl(const Volume& v, const Volume* mask) {
  if (v.kind() != VoxelKind::Intensity)
    throw KindError("zscore: expected an intensity volume");
  auto x = v.voxels();
  std::vector<std::size_t> sel;
  std::size_t n = x.size();
  if (mask) {
    if (mask->geometry().dims != v.geometry().dims)
      throw GeometryError("zscore: mask dims differ from volume dims");
    auto m = mask->voxels();
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] != 0.0) sel.push_back(i);
    if (sel.empty()) throw EmptyMaskError("zscore: mask selects no voxels");
    n = sel.size();
  }
  auto value = [&](std::size_t i) { return mask ? x[sel[i]] : x[i]; };

  double mean = pairwise_sum(value, 0, n) / static_cast<double>(n);
  double var = pairwise_sum(
                   [&](std::size_t i) {
                     double d = value(i) - mean;
                     return d * d;
                   },
                   0, n) /
               static_cast<double>(n);
  double stddev = std::sqrt(var);
  if (!(stddev > kMinStd))
    throw DegenerateStatisticsError("zscore: voxel standard deviation is degenerate");

  Volume out = Volume::intensity(v.geometry(), DataType::Float64);
  auto y = out.voxels();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / stddev;
  return out;
}

}  // namespace

const char* task_name(Task t) { return t == Task::Oars ? "oars" : "gtvs"; }
const char* modality_name(Modality m) {
  return m == Modality::Contrast ? "contrast" : "plain";
}

Task task_from_string(const std::string& s) {
  if (s == "oars" || s == "OARS") return Task::Oars;
  if (s == "gtvs" || s == "GTVS") return Task::Gtvs;
  throw ParameterError("unknown task '" + s + "' (expected oars or gtvs)");
}

void IntensityWindow::validate() const {
  if (!(lo < hi)) throw ValidationError("intensity window requires lo < hi");
}

IntensityWindow default_window(Task task, Modality modality) {
  if (task == Task::Oars)
    return modality == Modality::Contrast ? IntensityWindow{-400.0, 2000.0}
                                          : IntensityWindow{-300.0, 800.0};
  return modality == Modality::Contrast ? IntensityWindow{-1000.0, 1000.0}
                                        : IntensityWindow{-600.0, 600.0};
}

WindowTable::WindowTable() {
  for (Task t : {Task::Oars, Task::Gtvs})
    for (Modality m : {Modality::Contrast, Modality::Plain})
      table_[static_cast<int>(t)][static_cast<int>(m)] = default_window(t, m);
}

IntensityWindow WindowTable::window_for(Task t, Modality m) const {
  return table_[static_cast<int>(t)][static_cast<int>(m)];
}

void WindowTable::set(Task t, Modality m, IntensityWindow w) {
  w.validate();
  table_[static_cast<int>(t)][static_cast<int>(m)] = w;
}

WindowTable WindowTable::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_object()) throw ValidationError("window table: expected a JSON object");
  WindowTable table;
  for (Task t : {Task::Oars, Task::Gtvs}) {
    for (Modality m : {Modality::Contrast, Modality::Plain}) {
      std::string key = std::string(task_name(t)) + "." + modality_name(m);
      if (!j.contains(key)) continue;
      const auto& arr = j.at(key);
      if (!arr.is_array() || arr.size() != 2)
        throw ValidationError("window table: '" + key + "' must be [lo, hi]");
      table.set(t, m, IntensityWindow{arr[0].get<double>(), arr[1].get<double>()});
    }
  }
  return table;
}

std::string WindowTable::to_json_text() const {
  nlohmann::json j = nlohmann::json::object();
  for (Task t : {Task::Oars, Task::Gtvs}) {
    for (Modality m : {Modality::Contrast, Modality::Plain}) {
      IntensityWindow w = window_for(t, m);
      j[std::string(task_name(t)) + "." + modality_name(m)] = {w.lo, w.hi};
    }
  }
  return j.dump();
}

Volume clamp_window(const Volume& v, IntensityWindow w) {
  w.validate();
  if (v.kind() != VoxelKind::Intensity)
    throw KindError("clamp_window: expected an intensity volume");
  Volume out = v;
  for (double& x : out.voxels()) x = std::clamp(x, w.lo, w.hi);
  return out;
}

Volume zscore(const Volume& v) { return zscore_impl(v, nullptr); }

Volume zscore(const Volume& v, const Volume& mask) { return zscore_impl(v, &mask); }

VolumeStats volume_stats(const Volume& v) {
  auto x = v.voxels();
  std::size_t n = x.size();
  auto value = [&](std::size_t i) { return x[i]; };
  double mean = pairwise_sum(value, 0, n) / static_cast<double>(n);
  double var = pairwise_sum(
                   [&](std::size_t i) {
                     double d = x[i] - mean;
                     return d * d;
                   },
                   0, n) /
               static_cast<double>(n);
  return {mean, std::sqrt(var)};
}

}  // namespace segpipe
