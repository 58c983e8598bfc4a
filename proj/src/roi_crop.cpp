#include "segpipe/roi_crop.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace segpipe {

namespace {

// 2D flood fill of the background from the slice border; anything the
// fill cannot reach is an enclosed cavity.
void fill_slice_holes(std::vector<std::uint8_t>& slice, std::int64_t nx,
                      std::int64_t ny, std::vector<std::int32_t>& stack,
                      std::vector<std::uint8_t>& reached) {
  reached.assign(static_cast<std::size_t>(nx * ny), 0);
  stack.clear();
  auto push = [&](std::int64_t x, std::int64_t y) {
    std::size_t idx = static_cast<std::size_t>(y * nx + x);
    if (!slice[idx] && !reached[idx]) {
      reached[idx] = 1;
      stack.push_back(static_cast<std::int32_t>(idx));
    }
  };
  for (std::int64_t x = 0; x < nx; ++x) {
    push(x, 0);
    push(x, ny - 1);
  }
  for (std::int64_t y = 0; y < ny; ++y) {
    push(0, y);
    push(nx - 1, y);
  }
  while (!stack.empty()) {
    std::int64_t idx = stack.back();
    stack.pop_back();
    std::int64_t x = idx % nx, y = idx / nx;
    if (x > 0) push(x - 1, y);
    if (x + 1 < nx) push(x + 1, y);
    if (y > 0) push(x, y - 1);
    if (y + 1 < ny) push(x, y + 1);
  }
  for (std::size_t i = 0; i < slice.size(); ++i)
    if (!slice[i] && !reached[i]) slice[i] = 1;
}

struct UnionFind {
  std::vector<std::int32_t> parent;

  std::int32_t make() {
    parent.push_back(static_cast<std::int32_t>(parent.size()));
    return parent.back();
  }
  std::int32_t find(std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

void BBox::validate_within(const std::array<std::int64_t, 3>& dims) const {
  for (int a = 0; a < 3; ++a) {
    if (lo[a] < 0 || hi[a] < lo[a] || hi[a] >= dims[a]) {
      std::ostringstream os;
      os << "bbox out of range on axis " << "xyz"[a] << ": [" << lo[a] << ", "
         << hi[a] << "] against dim " << dims[a];
      throw BoundsError(os.str());
    }
  }
}

std::string CropRecord::to_json_text() const {
  nlohmann::json j;
  j["case_id"] = case_id;
  j["original_dims"] = {original_dims[0], original_dims[1], original_dims[2]};
  j["bbox_lo"] = {bbox.lo[0], bbox.lo[1], bbox.lo[2]};
  j["bbox_hi"] = {bbox.hi[0], bbox.hi[1], bbox.hi[2]};
  j["margin_used"] = margin_used;
  return j.dump(2);
}

CropRecord CropRecord::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  CropRecord rec;
  rec.case_id = j.at("case_id").get<std::string>();
  for (int a = 0; a < 3; ++a) {
    rec.original_dims[a] = j.at("original_dims").at(a).get<std::int64_t>();
    rec.bbox.lo[a] = j.at("bbox_lo").at(a).get<std::int64_t>();
    rec.bbox.hi[a] = j.at("bbox_hi").at(a).get<std::int64_t>();
  }
  rec.margin_used = j.at("margin_used").get<std::int64_t>();
  return rec;
}

Volume body_mask_threshold(const Volume& ct, double threshold_hu) {
  if (ct.kind() != VoxelKind::Intensity)
    throw KindError("body_mask_threshold: expected an intensity volume");
  const auto& dims = ct.dims();
  Volume mask = Volume::label(ct.geometry(), DataType::UInt8);
  auto in = ct.voxels();
  auto out = mask.voxels();

  const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];
  std::vector<std::uint8_t> slice(static_cast<std::size_t>(nx * ny));
  std::vector<std::uint8_t> reached;
  std::vector<std::int32_t> stack;
  for (std::int64_t z = 0; z < nz; ++z) {
    const std::size_t base = static_cast<std::size_t>(z * nx * ny);
    for (std::size_t i = 0; i < slice.size(); ++i)
      slice[i] = in[base + i] >= threshold_hu ? 1 : 0;
    fill_slice_holes(slice, nx, ny, stack, reached);
    for (std::size_t i = 0; i < slice.size(); ++i) out[base + i] = slice[i];
  }
  return mask;
}

ComponentLabeling label_components(const Volume& mask, Connectivity connectivity) {
  const auto& dims = mask.dims();
  const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];
  auto in = mask.voxels();
  const std::size_t n = in.size();

  // offsets to already-scanned neighbors (negative scan index)
  std::vector<std::array<std::int64_t, 3>> nbr;
  if (connectivity == Connectivity::Six) {
    nbr = {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
  } else {
    for (std::int64_t dz = -1; dz <= 0; ++dz)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          std::int64_t ord = dx + 3 * (dy + 3 * dz);
          if (ord < 0) nbr.push_back({dx, dy, dz});
        }
  }

  std::vector<std::int32_t> provisional(n, 0);  // 0 = background
  UnionFind uf;
  uf.make();  // slot 0 reserved for background

  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        std::size_t idx = static_cast<std::size_t>(x + nx * (y + ny * z));
        if (in[idx] == 0.0) continue;
        std::int32_t label = 0;
        for (const auto& d : nbr) {
          std::int64_t xx = x + d[0], yy = y + d[1], zz = z + d[2];
          if (xx < 0 || yy < 0 || zz < 0 || xx >= nx || yy >= ny) continue;
          std::size_t nidx = static_cast<std::size_t>(xx + nx * (yy + ny * zz));
          std::int32_t nl = provisional[nidx];
          if (nl == 0) continue;
          if (label == 0)
            label = nl;
          else
            uf.unite(label, nl);
        }
        if (label == 0) label = uf.make();
        provisional[idx] = label;
      }
    }
  }

  // gather roots: size and first scan index
  std::vector<std::int64_t> size_of(uf.parent.size(), 0);
  std::vector<std::int64_t> first_of(uf.parent.size(), -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (provisional[i] == 0) continue;
    std::int32_t root = uf.find(provisional[i]);
    provisional[i] = root;
    ++size_of[root];
    if (first_of[root] < 0) first_of[root] = static_cast<std::int64_t>(i);
  }
  std::vector<std::int32_t> roots;
  for (std::size_t r = 1; r < uf.parent.size(); ++r)
    if (size_of[r] > 0) roots.push_back(static_cast<std::int32_t>(r));
  std::sort(roots.begin(), roots.end(), [&](std::int32_t a, std::int32_t b) {
    if (size_of[a] != size_of[b]) return size_of[a] > size_of[b];
    return first_of[a] < first_of[b];
  });

  std::vector<std::int32_t> final_id(uf.parent.size(), 0);
  ComponentLabeling result;
  result.sizes.reserve(roots.size());
  for (std::size_t k = 0; k < roots.size(); ++k) {
    final_id[roots[k]] = static_cast<std::int32_t>(k + 1);
    result.sizes.push_back(size_of[roots[k]]);
  }

  result.labels = Volume::label(mask.geometry(), DataType::Int32);
  auto out = result.labels.voxels();
  for (std::size_t i = 0; i < n; ++i)
    if (provisional[i] != 0) out[i] = final_id[provisional[i]];
  return result;
}

Volume largest_component(const ComponentLabeling& c) {
  if (c.sizes.empty())
    throw EmptyMaskError("largest_component: no components in labeling");
  Volume out = Volume::label(c.labels.geometry(), DataType::UInt8);
  auto in = c.labels.voxels();
  auto o = out.voxels();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] == 1.0 ? 1.0 : 0.0;
  return out;
}

BBox fit_bbox(const Volume& mask, std::int64_t margin, bool full_z) {
  if (margin < 0) throw ParameterError("fit_bbox: margin must be >= 0");
  const auto& dims = mask.dims();
  auto in = mask.voxels();
  std::array<std::int64_t, 3> lo = {dims[0], dims[1], dims[2]};
  std::array<std::int64_t, 3> hi = {-1, -1, -1};
  std::size_t idx = 0;
  for (std::int64_t z = 0; z < dims[2]; ++z)
    for (std::int64_t y = 0; y < dims[1]; ++y)
      for (std::int64_t x = 0; x < dims[0]; ++x, ++idx) {
        if (in[idx] == 0.0) continue;
        lo[0] = std::min(lo[0], x);
        lo[1] = std::min(lo[1], y);
        lo[2] = std::min(lo[2], z);
        hi[0] = std::max(hi[0], x);
        hi[1] = std::max(hi[1], y);
        hi[2] = std::max(hi[2], z);
      }
  if (hi[0] < 0) throw EmptyMaskError("fit_bbox: mask has no foreground");

  BBox box;
  for (int a = 0; a < 2; ++a) {  // margin on x and y only
    box.lo[a] = std::max<std::int64_t>(0, lo[a] - margin);
    box.hi[a] = std::min(dims[a] - 1, hi[a] + margin);
  }
  if (full_z) {
    box.lo[2] = 0;
    box.hi[2] = dims[2] - 1;
  } else {
    box.lo[2] = lo[2];
    box.hi[2] = hi[2];
  }
  return box;
}

std::pair<Volume, CropRecord> crop(const Volume& v, const BBox& bbox,
                                   std::string case_id) {
  const auto& g = v.geometry();
  bbox.validate_within(g.dims);

  GridGeometry cg = g;
  cg.dims = bbox.extents();
  for (int r = 0; r < 3; ++r) {
    double shift = 0.0;
    for (int c = 0; c < 3; ++c)
      shift += g.orientation[r * 3 + c] * g.spacing[c] *
               static_cast<double>(bbox.lo[c]);
    cg.origin[r] = g.origin[r] + shift;
  }

  Volume out(cg, v.kind(), v.dtype());
  auto in = v.voxels();
  auto o = out.voxels();
  const auto e = bbox.extents();
  for (std::int64_t k = 0; k < e[2]; ++k)
    for (std::int64_t j = 0; j < e[1]; ++j) {
      std::size_t src = v.index(bbox.lo[0], bbox.lo[1] + j, bbox.lo[2] + k);
      std::size_t dst = out.index(0, j, k);
      std::copy_n(in.begin() + src, e[0], o.begin() + dst);
    }

  CropRecord rec;
  rec.original_dims = g.dims;
  rec.bbox = bbox;
  rec.case_id = std::move(case_id);
  return {std::move(out), std::move(rec)};
}

Volume restore(const Volume& cropped, const CropRecord& rec, double background) {
  const auto e = rec.bbox.extents();
  if (cropped.dims() != e) {
    std::ostringstream os;
    os << "restore: cropped dims (" << cropped.dims()[0] << "," << cropped.dims()[1]
       << "," << cropped.dims()[2] << ") do not match the record's bbox extents ("
       << e[0] << "," << e[1] << "," << e[2] << ")";
    throw RecordMismatchError(os.str());
  }
  try {
    rec.bbox.validate_within(rec.original_dims);
  } catch (const BoundsError& err) {
    throw RecordMismatchError(std::string("restore: corrupt record: ") + err.what());
  }

  GridGeometry g = cropped.geometry();
  g.dims = rec.original_dims;
  for (int r = 0; r < 3; ++r) {
    double shift = 0.0;
    for (int c = 0; c < 3; ++c)
      shift += g.orientation[r * 3 + c] * g.spacing[c] *
               static_cast<double>(rec.bbox.lo[c]);
    g.origin[r] = cropped.geometry().origin[r] - shift;
  }

  Volume out(g, cropped.kind(), cropped.dtype());
  auto o = out.voxels();
  if (background != 0.0) std::fill(o.begin(), o.end(), background);
  auto in = cropped.voxels();
  for (std::int64_t k = 0; k < e[2]; ++k)
    for (std::int64_t j = 0; j < e[1]; ++j) {
      std::size_t src = cropped.index(0, j, k);
      std::size_t dst = out.index(rec.bbox.lo[0], rec.bbox.lo[1] + j, rec.bbox.lo[2] + k);
      std::copy_n(in.begin() + src, e[0], o.begin() + dst);
    }
  return out;
}

}  // namespace segpipe
