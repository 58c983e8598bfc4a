#include "segpipe/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace segpipe {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

const char* shape_name(PrimitiveShape s) {
  switch (s) {
    case PrimitiveShape::Sphere: return "sphere";
    case PrimitiveShape::Ellipsoid: return "ellipsoid";
    case PrimitiveShape::Box: return "box";
    case PrimitiveShape::Tube: return "tube";
  }
  return "?";
}

PrimitiveShape shape_from_name(const std::string& s) {
  if (s == "sphere") return PrimitiveShape::Sphere;
  if (s == "ellipsoid") return PrimitiveShape::Ellipsoid;
  if (s == "box") return PrimitiveShape::Box;
  if (s == "tube") return PrimitiveShape::Tube;
  throw ValidationError("phantom: unknown shape '" + s + "'");
}

nlohmann::json primitive_json(const Primitive& p, bool with_label) {
  nlohmann::json j;
  j["shape"] = shape_name(p.shape);
  j["center"] = {p.center[0], p.center[1], p.center[2]};
  j["size"] = {p.size[0], p.size[1], p.size[2]};
  j["hu_contrast"] = p.hu_contrast;
  j["hu_plain"] = p.hu_plain;
  if (with_label) j["label_id"] = p.label_id;
  return j;
}

Primitive primitive_from_json(const nlohmann::json& j, bool with_label) {
  Primitive p;
  p.shape = shape_from_name(j.at("shape").get<std::string>());
  for (int a = 0; a < 3; ++a) p.center[a] = j.at("center").at(a).get<double>();
  const auto& size = j.at("size");
  if (!size.is_array() || size.empty() || size.size() > 3)
    throw ValidationError("phantom: size must be an array of 1 to 3 numbers");
  for (std::size_t a = 0; a < 3; ++a)
    p.size[a] = size.at(std::min(a, size.size() - 1)).get<double>();
  p.hu_contrast = j.at("hu_contrast").get<double>();
  p.hu_plain = j.at("hu_plain").get<double>();
  if (with_label) p.label_id = j.at("label_id").get<std::int64_t>();
  return p;
}

}  // namespace

double gaussian_at(std::uint64_t base, std::uint64_t index) {
  std::uint64_t h1 = splitmix64(base + 2 * index);
  std::uint64_t h2 = splitmix64(base + 2 * index + 1);
  double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool Primitive::contains(double x, double y, double z) const {
  double dx = x - center[0], dy = y - center[1], dz = z - center[2];
  switch (shape) {
    case PrimitiveShape::Sphere: {
      double r = size[0];
      return dx * dx + dy * dy + dz * dz <= r * r;
    }
    case PrimitiveShape::Ellipsoid: {
      double a = dx / size[0], b = dy / size[1], c = dz / size[2];
      return a * a + b * b + c * c <= 1.0;
    }
    case PrimitiveShape::Box:
      return std::abs(dx) <= size[0] && std::abs(dy) <= size[1] &&
             std::abs(dz) <= size[2];
    case PrimitiveShape::Tube: {
      double a = dx / size[0], b = dy / size[1];
      return a * a + b * b <= 1.0 && std::abs(dz) <= size[2];
    }
  }
  return false;
}

std::array<double, 3> Primitive::extent() const {
  if (shape == PrimitiveShape::Sphere) return {size[0], size[0], size[0]};
  return size;
}

void PhantomSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ValidationError("phantom spec: dims");
    if (!(spacing[a] > 0.0)) throw ValidationError("phantom spec: spacing");
  }
  if (!(noise_sigma >= 0.0)) throw ValidationError("phantom spec: noise_sigma");
  if (body.label_id != 0) throw ValidationError("phantom spec: body.label_id");

  std::set<std::int64_t> ids;
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto& p = primitives[i];
    std::string where = "phantom spec: primitives[" + std::to_string(i) + "]";
    if (p.label_id <= 0) throw ValidationError(where + ".label_id");
    if (!ids.insert(p.label_id).second)
      throw ValidationError(where + ".label_id (duplicate)");
    for (int a = 0; a < 3; ++a)
      if (!(p.extent()[a] > 0.0)) throw ValidationError(where + ".size");
  }

  auto check_fit = [&](const Primitive& p, const std::string& where) {
    auto e = p.extent();
    for (int a = 0; a < 3; ++a) {
      if (p.center[a] - e[a] < 0.0 ||
          p.center[a] + e[a] > static_cast<double>(dims[a] - 1))
        throw ValidationError(where + " does not fit within dims");
    }
  };
  check_fit(body, "phantom spec: body");
  for (std::size_t i = 0; i < primitives.size(); ++i)
    check_fit(primitives[i], "phantom spec: primitives[" + std::to_string(i) + "]");
}

PhantomVolumes generate(const PhantomSpec& spec) {
  spec.validate();
  GridGeometry g;
  g.dims = spec.dims;
  g.spacing = spec.spacing;

  PhantomVolumes out{Volume::intensity(g, DataType::Float32),
                     Volume::intensity(g, DataType::Float32),
                     Volume::label(g, DataType::Int16),
                     Volume::label(g, DataType::UInt8)};
  auto contrast = out.contrast_ct.voxels();
  auto plain = out.plain_ct.voxels();
  auto labels = out.labels.voxels();
  auto body = out.body_mask.voxels();

  const std::int64_t nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
  std::size_t idx = 0;
  for (std::int64_t z = 0; z < nz; ++z)
    for (std::int64_t y = 0; y < ny; ++y)
      for (std::int64_t x = 0; x < nx; ++x, ++idx) {
        double px = static_cast<double>(x), py = static_cast<double>(y),
               pz = static_cast<double>(z);
        double hu_c = -1000.0, hu_p = -1000.0;
        if (spec.body.contains(px, py, pz)) {
          hu_c = spec.body.hu_contrast;
          hu_p = spec.body.hu_plain;
          body[idx] = 1.0;
        }
        for (const auto& p : spec.primitives) {
          if (p.contains(px, py, pz)) {
            hu_c = p.hu_contrast;
            hu_p = p.hu_plain;
            labels[idx] = static_cast<double>(p.label_id);  // last one wins
          }
        }
        contrast[idx] = hu_c;
        plain[idx] = hu_p;
      }

  if (spec.noise_sigma > 0.0) {
    const std::uint64_t base_c = splitmix64(spec.seed);
    const std::uint64_t base_p = splitmix64(spec.seed ^ 0x706C61696E563031ull);
    for (std::size_t i = 0; i < contrast.size(); ++i) {
      contrast[i] += spec.noise_sigma * gaussian_at(base_c, i);
      plain[i] += spec.noise_sigma * gaussian_at(base_p, i);
    }
  }
  // keep CT values on the float32 grid so the volumes store compactly
  for (std::size_t i = 0; i < contrast.size(); ++i) {
    contrast[i] = static_cast<double>(static_cast<float>(contrast[i]));
    plain[i] = static_cast<double>(static_cast<float>(plain[i]));
  }
  return out;
}

Volume threshold_segment(const Volume& ct, std::span<const ThresholdRule> rules) {
  if (ct.kind() != VoxelKind::Intensity)
    throw KindError("threshold_segment: expected an intensity volume");
  std::vector<ThresholdRule> sorted(rules.begin(), rules.end());
  for (const auto& r : sorted)
    if (!(r.lo <= r.hi)) throw ValidationError("threshold_segment: rule with lo > hi");
  std::sort(sorted.begin(), sorted.end(),
            [](const ThresholdRule& a, const ThresholdRule& b) { return a.lo < b.lo; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].lo <= sorted[i - 1].hi) {
      std::ostringstream os;
      os << "threshold_segment: rules [" << sorted[i - 1].lo << ", " << sorted[i - 1].hi
         << "] and [" << sorted[i].lo << ", " << sorted[i].hi << "] overlap";
      throw RuleConflictError(os.str());
    }
  }

  Volume out = Volume::label(ct.geometry(), DataType::Int16);
  auto in = ct.voxels();
  auto o = out.voxels();
  for (std::size_t i = 0; i < in.size(); ++i) {
    double v = in[i];
    // few rules; linear scan beats binary search at this size
    for (const auto& r : sorted) {
      if (v < r.lo) break;
      if (v <= r.hi) {
        o[i] = static_cast<double>(r.label_id);
        break;
      }
    }
  }
  return out;
}

PhantomSpec head_neck_preset(std::array<std::int64_t, 3> dims,
                             std::array<double, 3> spacing, double noise_sigma,
                             std::uint64_t seed) {
  const double dx = static_cast<double>(dims[0]);
  const double dy = static_cast<double>(dims[1]);
  const double dz = static_cast<double>(dims[2]);

  PhantomSpec spec;
  spec.dims = dims;
  spec.spacing = spacing;
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;

  spec.body = {PrimitiveShape::Ellipsoid,
               {dx / 2, dy / 2, dz / 2},
               {0.33 * dx, 0.29 * dy, 0.42 * dz},
               0.0,
               0.0,
               0};

  // three structures near the top end, pairwise disjoint
  spec.primitives.push_back({PrimitiveShape::Sphere,
                             {dx / 2 - 0.10 * dx, dy / 2 - 0.04 * dy, 0.72 * dz},
                             {0.047 * dx, 0, 0},
                             200.0,
                             180.0,
                             1});
  spec.primitives.push_back({PrimitiveShape::Ellipsoid,
                             {dx / 2 + 0.10 * dx, dy / 2 + 0.03 * dy, 0.70 * dz},
                             {0.040 * dx, 0.055 * dy, 0.060 * dz},
                             400.0,
                             380.0,
                             2});
  spec.primitives.push_back({PrimitiveShape::Box,
                             {dx / 2, dy / 2 - 0.12 * dy, 0.72 * dz},
                             {0.030 * dx, 0.025 * dy, 0.075 * dz},
                             600.0,
                             560.0,
                             3});
  // soft-tissue tube on the axis, spanning every axial slice
  spec.primitives.push_back({PrimitiveShape::Tube,
                             {dx / 2, dy / 2, (dz - 1) / 2},
                             {0.025 * dx, 0.025 * dx, (dz - 1) / 2},
                             -200.0,
                             -200.0,
                             4});
  return spec;
}

std::vector<ThresholdRule> head_neck_preset_rules(double widen) {
  return {{-250.0 - widen, -150.0 + widen, 4},
          {150.0 - widen, 250.0 + widen, 1},
          {350.0 - widen, 450.0 + widen, 2},
          {550.0 - widen, 650.0 + widen, 3}};
}

PhantomSpec PhantomSpec::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PhantomSpec spec;
  for (int a = 0; a < 3; ++a) {
    spec.dims[a] = j.at("dims").at(a).get<std::int64_t>();
    spec.spacing[a] = j.at("spacing").at(a).get<double>();
  }
  spec.body = primitive_from_json(j.at("body"), false);
  for (const auto& pj : j.at("primitives"))
    spec.primitives.push_back(primitive_from_json(pj, true));
  if (j.contains("noise_sigma")) spec.noise_sigma = j.at("noise_sigma").get<double>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  spec.validate();
  return spec;
}

std::string PhantomSpec::to_json_text() const {
  nlohmann::json j;
  j["dims"] = {dims[0], dims[1], dims[2]};
  j["spacing"] = {spacing[0], spacing[1], spacing[2]};
  j["body"] = primitive_json(body, false);
  j["primitives"] = nlohmann::json::array();
  for (const auto& p : primitives) j["primitives"].push_back(primitive_json(p, true));
  j["noise_sigma"] = noise_sigma;
  j["seed"] = seed;
  return j.dump(2);
}

}  // namespace segpipe
