#include "segpipe/volume.hpp"

#include <cmath>
#include <sstream>

namespace segpipe {

std::size_t byte_width(DataType t) {
  switch (t) {
    case DataType::UInt8: return 1;
    case DataType::Int16: return 2;
    case DataType::Int32: return 4;
    case DataType::Float32: return 4;
    case DataType::Float64: return 8;
  }
  return 0;
}

const char* dtype_name(DataType t) {
  switch (t) {
    case DataType::UInt8: return "uint8";
    case DataType::Int16: return "int16";
    case DataType::Int32: return "int32";
    case DataType::Float32: return "float32";
    case DataType::Float64: return "float64";
  }
  return "?";
}

void GridGeometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1)
      throw ValidationError("geometry: dims must be >= 1 on every axis");
    if (!(spacing[a] > 0.0))
      throw ValidationError("geometry: spacing must be positive on every axis");
    if (!std::isfinite(origin[a]))
      throw ValidationError("geometry: origin must be finite");
  }
  // column norms
  for (int c = 0; c < 3; ++c) {
    double n2 = 0.0;
    for (int r = 0; r < 3; ++r) {
      double e = orientation[r * 3 + c];
      n2 += e * e;
    }
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-6)
      throw ValidationError("geometry: orientation columns must be unit norm");
  }
  const auto& m = orientation;
  double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
  if (std::abs(det) < 1e-9)
    throw ValidationError("geometry: orientation matrix is singular");
}

bool same_grid(const GridGeometry& a, const GridGeometry& b, double tol_mm) {
  if (a.dims != b.dims) return false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.spacing[i] - b.spacing[i]) > tol_mm) return false;
    if (std::abs(a.origin[i] - b.origin[i]) > tol_mm) return false;
  }
  for (int i = 0; i < 9; ++i)
    if (std::abs(a.orientation[i] - b.orientation[i]) > 1e-6) return false;
  return true;
}

Volume::Volume(GridGeometry geom, VoxelKind kind, DataType dtype)
    : geom_(geom), kind_(kind), dtype_(dtype) {
  geom_.validate();
  data_.assign(static_cast<std::size_t>(geom_.voxel_count()), 0.0);
}

Volume Volume::intensity(GridGeometry g, DataType d) {
  return Volume(g, VoxelKind::Intensity, d);
}

Volume Volume::label(GridGeometry g, DataType d) {
  return Volume(g, VoxelKind::Label, d);
}

Volume Volume::to_label(DataType d) const {
  Volume out(geom_, VoxelKind::Label, d);
  out.data_ = data_;
  out.validate();
  return out;
}

void Volume::validate() const {
  geom_.validate();
  if (data_.size() != static_cast<std::size_t>(geom_.voxel_count()))
    throw ValidationError("volume: voxel count does not match dims");
  if (kind_ == VoxelKind::Label) {
    for (double x : data_) {
      if (!(x >= 0.0) || x != std::floor(x))
        throw ValidationError("volume: label voxels must be non-negative integers");
    }
  }
}

PairedCase validate_pair(Volume a, Volume b, std::string case_id) {
  static const char axes[3] = {'x', 'y', 'z'};
  const auto& ga = a.geometry();
  const auto& gb = b.geometry();
  for (int i = 0; i < 3; ++i) {
    if (ga.dims[i] != gb.dims[i]) {
      std::ostringstream os;
      os << "case " << case_id << ": dims differ on axis " << axes[i] << " ("
         << ga.dims[i] << " vs " << gb.dims[i] << ")";
      throw GeometryError(os.str());
    }
  }
  std::string off_axes;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(ga.spacing[i] - gb.spacing[i]) > kGridTolMm ||
        std::abs(ga.origin[i] - gb.origin[i]) > kGridTolMm) {
      if (!off_axes.empty()) off_axes += ',';
      off_axes += axes[i];
    }
  }
  bool orient_off = false;
  for (int i = 0; i < 9; ++i)
    if (std::abs(ga.orientation[i] - gb.orientation[i]) > 1e-6) orient_off = true;
  if (!off_axes.empty() || orient_off) {
    std::ostringstream os;
    os << "case " << case_id << ": volumes are not co-registered within "
       << kGridTolMm << " mm";
    if (!off_axes.empty()) os << " (deviation on " << off_axes << ")";
    throw RegistrationError(os.str());
  }
  return PairedCase{std::move(a), std::move(b), std::move(case_id)};
}

}  // namespace segpipe
