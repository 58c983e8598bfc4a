#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

enum class Connectivity { Six = 6, TwentySix = 26 };

/// Labeling of foreground components. Component ids are 1..K, ordered by
/// decreasing voxel count; ties break on the first voxel in scan order.
struct ComponentLabeling {
  Volume labels;                     // 0 = background
  std::vector<std::int64_t> sizes;   // sizes[k-1] = voxels of component k
};

/// Axis-aligned box, inclusive voxel indices on both ends.
struct BBox {
  std::array<std::int64_t, 3> lo{0, 0, 0};
  std::array<std::int64_t, 3> hi{0, 0, 0};

  std::array<std::int64_t, 3> extents() const {
    return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  }
  void validate_within(const std::array<std::int64_t, 3>& dims) const;
  bool operator==(const BBox&) const = default;
};

/// Token that makes a crop invertible.
struct CropRecord {
  std::array<std::int64_t, 3> original_dims{0, 0, 0};
  BBox bbox;
  std::int64_t margin_used = 0;
  std::string case_id;

  std::string to_json_text() const;
  static CropRecord from_json_text(const std::string& text);
  bool operator==(const CropRecord&) const = default;
};

/// Binary body mask: 1 where HU >= threshold, then per-axial-slice
/// filling of enclosed background cavities so airways and sinuses do not
/// fragment the head component.
Volume body_mask_threshold(const Volume& ct, double threshold_hu = -500.0);

/// Connected components of the nonzero voxels of a binary mask.
ComponentLabeling label_components(const Volume& mask,
                                   Connectivity connectivity = Connectivity::TwentySix);

/// Binary mask of component id 1 (the largest). Empty labeling raises
/// EmptyMaskError.
Volume largest_component(const ComponentLabeling& c);

/// Bounding box of the foreground, widened by `margin` voxels in x and y
/// (clipped at the volume bounds). With full_z the z extent covers every
/// axial slice regardless of the foreground.
BBox fit_bbox(const Volume& mask, std::int64_t margin, bool full_z);

/// Extract the bbox sub-block. The record stores everything needed to
/// undo the crop. The cropped volume's origin is shifted to keep it in
/// physical alignment.
std::pair<Volume, CropRecord> crop(const Volume& v, const BBox& bbox,
                                   std::string case_id = "");

/// Paste a cropped label map back into a full-resolution grid,
/// `background` outside the recorded bbox.
Volume restore(const Volume& cropped, const CropRecord& rec, double background = 0.0);

}  // namespace segpipe
