#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segpipe/errors.hpp"

namespace segpipe {

enum class VoxelKind { Intensity, Label };

/// On-disk scalar type. In memory every voxel is held as a double; the
/// dtype records how the volume was (or should be) stored.
enum class DataType { UInt8, Int16, Int32, Float32, Float64 };

std::size_t byte_width(DataType t);
const char* dtype_name(DataType t);

/// Voxel grid with physical placement. The direction matrix is row-major;
/// column c is the patient-space unit direction of voxel axis c.
struct GridGeometry {
  std::array<std::int64_t, 3> dims{1, 1, 1};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel
  std::array<double, 3> origin{0.0, 0.0, 0.0};   // mm
  std::array<double, 9> orientation{1, 0, 0, 0, 1, 0, 0, 0, 1};

  std::int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  void validate() const;  // throws ValidationError

  bool operator==(const GridGeometry&) const = default;
};

/// Grids match when dims are identical and spacing/origin agree within
/// tol_mm (absolute) and orientation within 1e-6 per entry.
bool same_grid(const GridGeometry& a, const GridGeometry& b, double tol_mm);

/// Absolute tolerance for co-registered pairs and metric grid checks.
inline constexpr double kGridTolMm = 1e-3;

/// Dense 3D scalar volume, x-fastest voxel order.
class Volume {
 public:
  Volume() = default;
  Volume(GridGeometry geom, VoxelKind kind, DataType dtype);

  static Volume intensity(GridGeometry g, DataType d = DataType::Float32);
  static Volume label(GridGeometry g, DataType d = DataType::Int32);

  const GridGeometry& geometry() const { return geom_; }
  const std::array<std::int64_t, 3>& dims() const { return geom_.dims; }
  const std::array<double, 3>& spacing() const { return geom_.spacing; }
  VoxelKind kind() const { return kind_; }
  DataType dtype() const { return dtype_; }
  void set_dtype(DataType d) { dtype_ = d; }
  void set_origin(const std::array<double, 3>& o) { geom_.origin = o; }

  std::int64_t voxel_count() const { return geom_.voxel_count(); }

  std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>(i + geom_.dims[0] * (j + geom_.dims[1] * k));
  }
  double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return data_[index(i, j, k)];
  }
  double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
    return data_[index(i, j, k)];
  }
  std::int64_t label_at(std::size_t idx) const {
    return static_cast<std::int64_t>(data_[idx]);
  }

  std::span<const double> voxels() const { return data_; }
  std::span<double> voxels() { return data_; }

  /// Reinterpret as a label volume; voxels must be non-negative integers.
  Volume to_label(DataType d = DataType::Int32) const;

  /// Checks geometry plus the label integrality invariant.
  void validate() const;

  bool operator==(const Volume& o) const {
    return kind_ == o.kind_ && geom_ == o.geom_ && data_ == o.data_;
  }

 private:
  GridGeometry geom_;
  VoxelKind kind_ = VoxelKind::Intensity;
  DataType dtype_ = DataType::Float32;
  std::vector<double> data_;
};

/// Co-registered bi-modal case.
struct PairedCase {
  Volume contrast_ct;
  Volume plain_ct;
  std::string case_id;
};

/// Accepts two volumes as a co-registered pair. Dims must be identical
/// (GeometryError names the differing axis); spacing and origin may
/// deviate by at most kGridTolMm (RegistrationError otherwise).
PairedCase validate_pair(Volume a, Volume b, std::string case_id);

}  // namespace segpipe
