// Brute-force reference implementations used only by tests. They stay
// independent of the library's algorithms: flood fill instead of
// union-find, all-pairs scans instead of separable transforms.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "segpipe/volume.hpp"

namespace oracle {

using segpipe::Volume;

struct Mask {
  std::array<std::int64_t, 3> dims;
  std::array<double, 3> spacing;
  std::vector<std::uint8_t> fg;

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>(x + dims[0] * (y + dims[1] * z));
  }
};

inline Mask from_volume(const Volume& v) {
  Mask m;
  m.dims = v.dims();
  m.spacing = v.spacing();
  m.fg.resize(v.voxels().size());
  for (std::size_t i = 0; i < m.fg.size(); ++i) m.fg[i] = v.voxels()[i] != 0.0;
  return m;
}

inline Volume to_volume(const Mask& m) {
  segpipe::GridGeometry g;
  g.dims = m.dims;
  g.spacing = m.spacing;
  Volume v = Volume::label(g, segpipe::DataType::UInt8);
  for (std::size_t i = 0; i < m.fg.size(); ++i) v.voxels()[i] = m.fg[i] ? 1.0 : 0.0;
  return v;
}

inline Mask random_mask(std::mt19937_64& rng, std::int64_t max_dim = 8,
                        double density = -1.0) {
  std::uniform_int_distribution<std::int64_t> dim(1, max_dim);
  Mask m;
  m.dims = {dim(rng), dim(rng), dim(rng)};
  std::uniform_real_distribution<double> sp(0.4, 3.0);
  m.spacing = {sp(rng), sp(rng), sp(rng)};
  if (density < 0.0) {
    std::uniform_real_distribution<double> d(0.05, 0.95);
    density = d(rng);
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  m.fg.resize(static_cast<std::size_t>(m.dims[0] * m.dims[1] * m.dims[2]));
  for (auto& f : m.fg) f = coin(rng) < density ? 1 : 0;
  return m;
}

// BFS flood fill components, relabeled by (size desc, first voxel asc).
inline std::vector<std::int32_t> flood_fill_components(const Mask& m, int connectivity,
                                                       std::vector<std::int64_t>* sizes_out) {
  std::vector<std::array<std::int64_t, 3>> nbr;
  for (std::int64_t dz = -1; dz <= 1; ++dz)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        int manhattan = std::abs(static_cast<int>(dx)) + std::abs(static_cast<int>(dy)) +
                        std::abs(static_cast<int>(dz));
        if (connectivity == 6 && manhattan != 1) continue;
        nbr.push_back({dx, dy, dz});
      }

  std::vector<std::int32_t> comp(m.fg.size(), 0);
  struct Info {
    std::int64_t size;
    std::int64_t first;
    std::int32_t id;
  };
  std::vector<Info> infos;
  std::int32_t next = 0;
  for (std::int64_t z = 0; z < m.dims[2]; ++z)
    for (std::int64_t y = 0; y < m.dims[1]; ++y)
      for (std::int64_t x = 0; x < m.dims[0]; ++x) {
        std::size_t idx = m.index(x, y, z);
        if (!m.fg[idx] || comp[idx] != 0) continue;
        ++next;
        Info info{0, static_cast<std::int64_t>(idx), next};
        std::deque<std::array<std::int64_t, 3>> queue{{x, y, z}};
        comp[idx] = next;
        while (!queue.empty()) {
          auto [cx, cy, cz] = queue.front();
          queue.pop_front();
          ++info.size;
          for (const auto& d : nbr) {
            std::int64_t nx = cx + d[0], ny = cy + d[1], nz = cz + d[2];
            if (nx < 0 || ny < 0 || nz < 0 || nx >= m.dims[0] || ny >= m.dims[1] ||
                nz >= m.dims[2])
              continue;
            std::size_t nidx = m.index(nx, ny, nz);
            if (m.fg[nidx] && comp[nidx] == 0) {
              comp[nidx] = next;
              queue.push_back({nx, ny, nz});
            }
          }
        }
        infos.push_back(info);
      }

  std::sort(infos.begin(), infos.end(), [](const Info& a, const Info& b) {
    if (a.size != b.size) return a.size > b.size;
    return a.first < b.first;
  });
  std::vector<std::int32_t> remap(next + 1, 0);
  if (sizes_out) sizes_out->clear();
  for (std::size_t k = 0; k < infos.size(); ++k) {
    remap[infos[k].id] = static_cast<std::int32_t>(k + 1);
    if (sizes_out) sizes_out->push_back(infos[k].size);
  }
  for (auto& c : comp) c = remap[c];
  return comp;
}

// O(n^2) nearest-foreground distance in mm.
inline std::vector<double> brute_edt(const Mask& m) {
  std::vector<std::array<std::int64_t, 3>> features;
  for (std::int64_t z = 0; z < m.dims[2]; ++z)
    for (std::int64_t y = 0; y < m.dims[1]; ++y)
      for (std::int64_t x = 0; x < m.dims[0]; ++x)
        if (m.fg[m.index(x, y, z)]) features.push_back({x, y, z});

  std::vector<double> d(m.fg.size(), 0.0);
  for (std::int64_t z = 0; z < m.dims[2]; ++z)
    for (std::int64_t y = 0; y < m.dims[1]; ++y)
      for (std::int64_t x = 0; x < m.dims[0]; ++x) {
        std::size_t idx = m.index(x, y, z);
        if (m.fg[idx]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& f : features) {
          double dx = static_cast<double>(x - f[0]) * m.spacing[0];
          double dy = static_cast<double>(y - f[1]) * m.spacing[1];
          double dz = static_cast<double>(z - f[2]) * m.spacing[2];
          best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
        }
        d[idx] = best;
      }
  return d;
}

// Surface per the 6-neighbor boundary rule.
inline std::vector<std::uint8_t> brute_surface(const Mask& m) {
  std::vector<std::uint8_t> s(m.fg.size(), 0);
  static const std::int64_t nb[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                        {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  for (std::int64_t z = 0; z < m.dims[2]; ++z)
    for (std::int64_t y = 0; y < m.dims[1]; ++y)
      for (std::int64_t x = 0; x < m.dims[0]; ++x) {
        std::size_t idx = m.index(x, y, z);
        if (!m.fg[idx]) continue;
        for (const auto& d : nb) {
          std::int64_t nx = x + d[0], ny = y + d[1], nz = z + d[2];
          bool outside = nx < 0 || ny < 0 || nz < 0 || nx >= m.dims[0] ||
                         ny >= m.dims[1] || nz >= m.dims[2];
          if (outside || !m.fg[m.index(nx, ny, nz)]) {
            s[idx] = 1;
            break;
          }
        }
      }
  return s;
}

// All-pairs surface distance NSD.
inline double brute_nsd(const Mask& pred, const Mask& ref, double tau) {
  bool pred_any = false, ref_any = false;
  for (auto f : pred.fg) pred_any |= f != 0;
  for (auto f : ref.fg) ref_any |= f != 0;
  if (!pred_any && !ref_any) return 1.0;
  if (!pred_any || !ref_any) return 0.0;

  auto sp = brute_surface(pred);
  auto sr = brute_surface(ref);
  auto collect = [&](const Mask& m, const std::vector<std::uint8_t>& s) {
    std::vector<std::array<std::int64_t, 3>> pts;
    for (std::int64_t z = 0; z < m.dims[2]; ++z)
      for (std::int64_t y = 0; y < m.dims[1]; ++y)
        for (std::int64_t x = 0; x < m.dims[0]; ++x)
          if (s[m.index(x, y, z)]) pts.push_back({x, y, z});
    return pts;
  };
  auto pp = collect(pred, sp);
  auto rp = collect(ref, sr);

  auto nearest = [&](const std::array<std::int64_t, 3>& a,
                     const std::vector<std::array<std::int64_t, 3>>& others) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : others) {
      double dx = static_cast<double>(a[0] - b[0]) * pred.spacing[0];
      double dy = static_cast<double>(a[1] - b[1]) * pred.spacing[1];
      double dz = static_cast<double>(a[2] - b[2]) * pred.spacing[2];
      best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return best;
  };

  std::uint64_t hits = 0;
  for (const auto& a : pp)
    if (nearest(a, rp) <= tau) ++hits;
  for (const auto& b : rp)
    if (nearest(b, pp) <= tau) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pp.size() + rp.size());
}

struct SetCounts {
  std::uint64_t a = 0, b = 0, both = 0, neither = 0;
};

inline SetCounts set_counts(const Mask& a, const Mask& b) {
  SetCounts c;
  for (std::size_t i = 0; i < a.fg.size(); ++i) {
    if (a.fg[i]) ++c.a;
    if (b.fg[i]) ++c.b;
    if (a.fg[i] && b.fg[i]) ++c.both;
    if (!a.fg[i] && !b.fg[i]) ++c.neither;
  }
  return c;
}

inline double brute_dice(const SetCounts& c) {
  if (c.a + c.b == 0) return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

inline double brute_precision(const SetCounts& c) {
  if (c.a + c.b == 0) return 1.0;
  if (c.a == 0) return 0.0;
  return static_cast<double>(c.both) / static_cast<double>(c.a);
}

inline double brute_recall(const SetCounts& c) {
  if (c.a + c.b == 0) return 1.0;
  if (c.b == 0) return 0.0;
  return static_cast<double>(c.both) / static_cast<double>(c.b);
}

}  // namespace oracle
