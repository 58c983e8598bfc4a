#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "segpipe/intensity.hpp"
#include "segpipe/label_ops.hpp"
#include "segpipe/metrics.hpp"
#include "segpipe/nifti.hpp"
#include "segpipe/phantom.hpp"
#include "segpipe/pipeline.hpp"
#include "segpipe/roi_crop.hpp"

namespace py = pybind11;
using namespace segpipe;

namespace {

// numpy arrays are exchanged with shape (z, y, x) in C order, which is
// exactly the library's x-fastest linear layout.
py::array_t<double> to_numpy(const Volume& v) {
  const auto& d = v.dims();
  py::array_t<double> out({d[2], d[1], d[0]});
  std::memcpy(out.mutable_data(), v.voxels().data(), v.voxels().size() * sizeof(double));
  return out;
}

Volume from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> arr,
                  std::array<double, 3> spacing, std::array<double, 3> origin,
                  const std::string& kind) {
  if (arr.ndim() != 3) throw ValidationError("expected a 3d array shaped (z, y, x)");
  GridGeometry g;
  g.dims = {arr.shape(2), arr.shape(1), arr.shape(0)};
  g.spacing = spacing;
  g.origin = origin;
  Volume v(g, kind == "label" ? VoxelKind::Label : VoxelKind::Intensity,
           kind == "label" ? DataType::Int32 : DataType::Float32);
  std::memcpy(v.voxels().data(), arr.data(), v.voxels().size() * sizeof(double));
  if (kind == "label") v.validate();
  return v;
}

Task parse_task(const std::string& s) { return task_from_string(s); }

Modality parse_modality(const std::string& s) {
  if (s == "contrast") return Modality::Contrast;
  if (s == "plain") return Modality::Plain;
  throw ParameterError("unknown modality '" + s + "'");
}

py::dict score_dict(const StructureScore& s) {
  py::dict d;
  d["label_id"] = s.label_id;
  d["dice"] = s.dice;
  d["precision"] = s.precision;
  d["recall"] = s.recall;
  d["nsd"] = s.nsd;
  d["tau_mm"] = s.tau_mm;
  d["absent_in_both"] = s.absent_in_both;
  return d;
}

}  // namespace

PYBIND11_MODULE(_segpipe, m) {
  m.doc() = "volumetric CT segmentation pipeline: windowing, ROI cropping, label "
            "merging, overlap and surface metrics, synthetic phantoms";

  py::register_exception<Error>(m, "SegpipeError");

  py::class_<Volume>(m, "Volume")
      .def_property_readonly("dims",
                             [](const Volume& v) {
                               return py::make_tuple(v.dims()[0], v.dims()[1], v.dims()[2]);
                             })
      .def_property_readonly("spacing",
                             [](const Volume& v) {
                               const auto& s = v.spacing();
                               return py::make_tuple(s[0], s[1], s[2]);
                             })
      .def_property_readonly("origin",
                             [](const Volume& v) {
                               const auto& o = v.geometry().origin;
                               return py::make_tuple(o[0], o[1], o[2]);
                             })
      .def_property_readonly("kind",
                             [](const Volume& v) {
                               return v.kind() == VoxelKind::Label ? "label" : "intensity";
                             })
      .def_property_readonly("dtype",
                             [](const Volume& v) { return std::string(dtype_name(v.dtype())); })
      .def("to_numpy", &to_numpy, "voxels as a (z, y, x) float64 array")
      .def("__eq__", [](const Volume& a, const Volume& b) { return a == b; });

  m.def("from_numpy", &from_numpy, py::arg("array"),
        py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 1.0},
        py::arg("origin") = std::array<double, 3>{0.0, 0.0, 0.0},
        py::arg("kind") = "intensity",
        "build a Volume from a (z, y, x) array");

  // file io
  m.def("read_volume", [](const std::filesystem::path& p) { return read_volume(p); },
        py::arg("path"));
  m.def("write_volume",
        [](const std::filesystem::path& p, const Volume& v) { write_volume(p, v); },
        py::arg("path"), py::arg("volume"));
  m.def("as_label", [](const Volume& v) { return v.to_label(); },
        "reinterpret an integer-valued volume as labels");

  // intensity
  m.def("default_window",
        [](const std::string& task, const std::string& modality) {
          IntensityWindow w = default_window(parse_task(task), parse_modality(modality));
          return py::make_tuple(w.lo, w.hi);
        },
        py::arg("task"), py::arg("modality"));
  m.def("clamp_window",
        [](const Volume& v, double lo, double hi) {
          return clamp_window(v, IntensityWindow{lo, hi});
        },
        py::arg("volume"), py::arg("lo"), py::arg("hi"));
  m.def("zscore", [](const Volume& v) { return zscore(v); }, py::arg("volume"));

  // roi crop
  m.def("body_mask_threshold",
        [](const Volume& ct, double thr) { return body_mask_threshold(ct, thr); },
        py::arg("ct"), py::arg("threshold_hu") = -500.0);
  m.def("label_components",
        [](const Volume& mask, int connectivity) {
          ComponentLabeling c = label_components(
              mask, connectivity == 6 ? Connectivity::Six : Connectivity::TwentySix);
          return py::make_tuple(c.labels, c.sizes);
        },
        py::arg("mask"), py::arg("connectivity") = 26,
        "returns (labels_volume, sizes), ids ordered by decreasing size");
  m.def("largest_component",
        [](const Volume& mask, int connectivity) {
          return largest_component(label_components(
              mask, connectivity == 6 ? Connectivity::Six : Connectivity::TwentySix));
        },
        py::arg("mask"), py::arg("connectivity") = 26);
  m.def("fit_bbox",
        [](const Volume& mask, std::int64_t margin, bool full_z) {
          BBox b = fit_bbox(mask, margin, full_z);
          return py::make_tuple(py::make_tuple(b.lo[0], b.lo[1], b.lo[2]),
                                py::make_tuple(b.hi[0], b.hi[1], b.hi[2]));
        },
        py::arg("mask"), py::arg("margin") = 15, py::arg("full_z") = true,
        "inclusive (lo, hi) corners");
  m.def("crop",
        [](const Volume& v, std::array<std::int64_t, 3> lo, std::array<std::int64_t, 3> hi,
           const std::string& case_id) {
          auto [out, rec] = crop(v, BBox{lo, hi}, case_id);
          return py::make_tuple(out, rec.to_json_text());
        },
        py::arg("volume"), py::arg("lo"), py::arg("hi"), py::arg("case_id") = "",
        "returns (cropped, crop_record_json)");
  m.def("restore",
        [](const Volume& cropped, const std::string& record_json, double background) {
          return restore(cropped, CropRecord::from_json_text(record_json), background);
        },
        py::arg("cropped"), py::arg("record_json"), py::arg("background") = 0.0);

  // label ops
  m.def("inventory",
        [](const Volume& v) {
          py::dict d;
          for (const auto& [id, n] : inventory(v).counts) d[py::int_(id)] = n;
          return d;
        },
        py::arg("labels"));
  m.def("apply_merge",
        [](const Volume& v, const std::map<std::int64_t, std::int64_t>& mapping,
           const std::vector<std::int64_t>& targets) {
          MergeMap mm;
          mm.mapping = {mapping.begin(), mapping.end()};
          mm.targets = {targets.begin(), targets.end()};
          return apply_merge(v, mm);
        },
        py::arg("labels"), py::arg("mapping"), py::arg("targets"));
  m.def("binarize", [](const Volume& v, std::int64_t id) { return binarize(v, id); },
        py::arg("labels"), py::arg("id"));

  // metrics
  m.def("confusion",
        [](const Volume& pred, const Volume& ref) {
          ConfusionCounts c = confusion(pred, ref);
          py::dict d;
          d["tp"] = c.tp;
          d["fp"] = c.fp;
          d["fn"] = c.fn;
          d["tn"] = c.tn;
          return d;
        },
        py::arg("pred"), py::arg("ref"));
  m.def("overlap_scores",
        [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
          OverlapScores s = overlap_scores(ConfusionCounts{tp, fp, fn, tn});
          py::dict d;
          d["dice"] = s.dice;
          d["precision"] = s.precision;
          d["recall"] = s.recall;
          return d;
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn") = 0);
  m.def("dice",
        [](const Volume& pred, const Volume& ref) {
          return overlap_scores(confusion(pred, ref)).dice;
        },
        py::arg("pred"), py::arg("ref"));
  m.def("edt", [](const Volume& mask) { return edt(mask); }, py::arg("mask"),
        "exact euclidean distance to the nearest foreground voxel, in mm");
  m.def("surface", [](const Volume& mask) { return surface(mask); }, py::arg("mask"));
  m.def("nsd",
        [](const Volume& pred, const Volume& ref, double tau) { return nsd(pred, ref, tau); },
        py::arg("pred"), py::arg("ref"), py::arg("tau_mm"));
  m.def("evaluate_case",
        [](const Volume& pred, const Volume& ref, const std::vector<std::int64_t>& labels,
           double tau) {
          py::list out;
          for (const auto& s : evaluate_case(pred, ref, labels, tau))
            out.append(score_dict(s));
          return out;
        },
        py::arg("pred"), py::arg("ref"), py::arg("labels"), py::arg("tau_mm") = 2.0);

  // phantom
  m.def("head_neck_preset",
        [](std::array<std::int64_t, 3> dims, std::array<double, 3> spacing, double noise,
           std::uint64_t seed) {
          return head_neck_preset(dims, spacing, noise, seed).to_json_text();
        },
        py::arg("dims") = std::array<std::int64_t, 3>{256, 256, 128},
        py::arg("spacing") = std::array<double, 3>{1.0, 1.0, 3.0},
        py::arg("noise_sigma") = 0.0, py::arg("seed") = 7,
        "preset phantom spec as JSON text");
  m.def("generate_phantom",
        [](const std::string& spec_json) {
          PhantomVolumes v = generate(PhantomSpec::from_json_text(spec_json));
          py::dict d;
          d["contrast_ct"] = v.contrast_ct;
          d["plain_ct"] = v.plain_ct;
          d["labels"] = v.labels;
          d["body_mask"] = v.body_mask;
          return d;
        },
        py::arg("spec_json"));
  m.def("threshold_segment",
        [](const Volume& ct, const std::vector<std::tuple<double, double, std::int64_t>>& rules) {
          std::vector<ThresholdRule> rs;
          for (const auto& [lo, hi, id] : rules) rs.push_back({lo, hi, id});
          return threshold_segment(ct, rs);
        },
        py::arg("ct"), py::arg("rules"), "rules are (lo_hu, hi_hu, label_id) tuples");

  // training plan
  m.def("emit_plan",
        [](const std::string& task) { return plan_json(emit_plan(parse_task(task))); },
        py::arg("task"), "training protocol as JSON text");
}
