#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

enum class PrimitiveShape { Sphere, Ellipsoid, Box, Tube };

/// Geometric primitive in voxel coordinates. Membership is tested at
/// voxel centers, boundaries inclusive.
///   sphere:    size[0] = radius
///   ellipsoid: size = semi-axes
///   box:       size = half-extents
///   tube:      z-aligned elliptical cylinder, size = {rx, ry, half-length}
struct Primitive {
  PrimitiveShape shape = PrimitiveShape::Sphere;
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> size{0, 0, 0};
  double hu_contrast = 0.0;
  double hu_plain = 0.0;
  std::int64_t label_id = 0;

  bool contains(double x, double y, double z) const;
  std::array<double, 3> extent() const;
  bool operator==(const Primitive&) const = default;
};

struct PhantomSpec {
  std::array<std::int64_t, 3> dims{64, 64, 32};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  Primitive body;                      // label_id must be 0
  std::vector<Primitive> primitives;   // distinct positive label ids
  double noise_sigma = 0.0;            // HU
  std::uint64_t seed = 0;

  void validate() const;  // ValidationError naming the offending field

  static PhantomSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
  bool operator==(const PhantomSpec&) const = default;
};

struct PhantomVolumes {
  Volume contrast_ct;
  Volume plain_ct;
  Volume labels;
  Volume body_mask;
};

/// Rasterize the spec. Background is air at -1000 HU, the body primitive
/// paints its HU, then each primitive in order (later ones occlude
/// earlier). Labels come from the primitives only; body_mask is the body
/// primitive's voxel set. Noise is Gaussian, deterministic from the seed
/// and voxel index (splitmix64 counter + Box-Muller), so identical specs
/// produce bit-identical volumes. CT values are kept on the float32 grid
/// so the volumes store compactly.
PhantomVolumes generate(const PhantomSpec& spec);

struct ThresholdRule {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t label_id = 0;
  bool operator==(const ThresholdRule&) const = default;
};

/// Rule-based oracle segmenter: a voxel gets the label of the single rule
/// whose [lo, hi] interval contains its value, else 0. Overlapping
/// intervals raise RuleConflictError.
Volume threshold_segment(const Volume& ct, std::span<const ThresholdRule> rules);

/// Mini head-neck preset: a body ellipsoid that does not reach the x/y
/// borders, three small structures near the top end, and a soft-tissue
/// tube on the axis spanning every axial slice.
PhantomSpec head_neck_preset(std::array<std::int64_t, 3> dims = {256, 256, 128},
                             std::array<double, 3> spacing = {1.0, 1.0, 3.0},
                             double noise_sigma = 0.0, std::uint64_t seed = 7);

/// Contrast-CT rules matching the preset's structures. `widen` grows each
/// interval on both sides (used when segmenting noisy phantoms).
std::vector<ThresholdRule> head_neck_preset_rules(double widen = 0.0);

/// Deterministic standard normal draw for stream `base` at `index`.
double gaussian_at(std::uint64_t base, std::uint64_t index);

}  // namespace segpipe
