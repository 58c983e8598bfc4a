#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "segpipe/nifti.hpp"
#include "segpipe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace segpipe;

namespace {

int report_outcomes(const std::vector<CaseOutcome>& outcomes) {
  int failures = 0;
  for (const auto& o : outcomes) {
    if (o.ok) {
      std::cout << "[ok]   " << o.case_id << ": " << o.message << "\n";
    } else {
      std::cout << "[fail] " << o.case_id << ": " << o.message << "\n";
      ++failures;
    }
  }
  std::cout << outcomes.size() << " case(s), " << failures << " failure(s)\n";
  return failures == 0 ? 0 : 1;
}

std::string read_text_file(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"head-neck CT segmentation pipeline: preprocessing, ROI cropping, "
               "label post-processing and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string task_str;
  int workers = 0;
  app.add_option("--config", config_path, "pipeline configuration JSON");
  app.add_option("--task", task_str, "oars or gtvs");
  app.add_option("--workers", workers, "worker threads for batch commands");

  auto load_config = [&]() {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = PipelineConfig::load(config_path);
    if (!task_str.empty()) cfg.task = task_from_string(task_str);
    if (workers > 0) cfg.workers = workers;
    cfg.validate();
    return cfg;
  };

  // preprocess
  std::string in_dir, out_dir;
  bool zscore_flag = false;
  auto* pre = app.add_subcommand("preprocess", "window (and optionally z-score) CT pairs");
  pre->add_option("--input", in_dir, "case directory")->required();
  pre->add_option("--output", out_dir, "output directory")->required();
  pre->add_flag("--zscore", zscore_flag, "z-score after windowing");

  // crop
  std::optional<double> threshold_opt;
  std::optional<std::int64_t> margin_opt;
  std::optional<int> connectivity_opt;
  bool no_full_z = false;
  auto* crp = app.add_subcommand("crop", "crop cases to the head-neck region");
  crp->add_option("--input", in_dir, "case directory")->required();
  crp->add_option("--output", out_dir, "output directory")->required();
  crp->add_option("--threshold", threshold_opt, "body mask threshold in HU");
  crp->add_option("--margin", margin_opt, "in-plane margin in voxels");
  crp->add_option("--connectivity", connectivity_opt, "6 or 26");
  crp->add_flag("--no-full-z", no_full_z, "do not force the full axial extent");

  // restore
  std::string pred_dir, records_dir;
  auto* rst = app.add_subcommand("restore", "paste cropped label maps back to full size");
  rst->add_option("--pred", pred_dir, "cropped prediction directory")->required();
  rst->add_option("--records", records_dir, "directory holding <case>.crop.json")->required();
  rst->add_option("--output", out_dir, "output directory")->required();

  // merge-labels
  std::string schema_path;
  auto* mrg = app.add_subcommand("merge-labels", "merge substructure labels onto targets");
  mrg->add_option("--input", in_dir, "label volume directory")->required();
  mrg->add_option("--output", out_dir, "output directory")->required();
  mrg->add_option("--labels", schema_path, "label schema JSON");

  // evaluate
  std::string ref_dir;
  std::optional<double> tau_opt;
  auto* evl = app.add_subcommand("evaluate", "score predictions against references");
  evl->add_option("--pred", pred_dir, "prediction directory")->required();
  evl->add_option("--ref", ref_dir, "reference directory")->required();
  evl->add_option("--output", out_dir, "report directory")->required();
  evl->add_option("--labels", schema_path, "label schema JSON (also applies merges)");
  evl->add_option("--tau", tau_opt, "surface distance tolerance in mm");

  // phantom
  std::string spec_path, case_id = "phantom001";
  std::vector<std::int64_t> dims_opt;
  double noise_sigma = 0.0;
  std::uint64_t seed = 7;
  auto* phm = app.add_subcommand("phantom", "generate a synthetic bi-modal case");
  phm->add_option("--output", out_dir, "output directory")->required();
  phm->add_option("--spec", spec_path, "phantom spec JSON (default: built-in preset)");
  phm->add_option("--dims", dims_opt, "preset dims, e.g. --dims 256 256 128")->expected(3);
  phm->add_option("--noise", noise_sigma, "preset noise sigma in HU");
  phm->add_option("--seed", seed, "preset noise seed");
  phm->add_option("--case-id", case_id, "case id for the output files");

  // emit-plan
  std::string plan_out;
  auto* pln = app.add_subcommand("emit-plan", "print the training protocol as JSON");
  pln->add_option("--output", plan_out, "write to a file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(pre)) {
      PipelineConfig cfg = load_config();
      if (zscore_flag) cfg.zscore = true;
      return report_outcomes(run_preprocess(in_dir, out_dir, cfg));
    }
    if (app.got_subcommand(crp)) {
      PipelineConfig cfg = load_config();
      if (threshold_opt) cfg.crop.threshold_hu = *threshold_opt;
      if (margin_opt) cfg.crop.margin_px = *margin_opt;
      if (connectivity_opt)
        cfg.crop.connectivity =
            *connectivity_opt == 6 ? Connectivity::Six : Connectivity::TwentySix;
      if (no_full_z) cfg.crop.full_z = false;
      return report_outcomes(run_crop(in_dir, out_dir, cfg));
    }
    if (app.got_subcommand(rst)) {
      return report_outcomes(run_restore(pred_dir, records_dir, out_dir, load_config()));
    }
    if (app.got_subcommand(mrg)) {
      PipelineConfig cfg = load_config();
      LabelSchema schema;
      if (!schema_path.empty())
        schema = LabelSchema::from_json_text(read_text_file(schema_path));
      else
        schema = cfg.task == Task::Oars ? default_oars_schema() : default_gtvs_schema();
      return report_outcomes(run_merge_labels(in_dir, out_dir, schema, cfg));
    }
    if (app.got_subcommand(evl)) {
      PipelineConfig cfg = load_config();
      if (!schema_path.empty()) cfg.labels_schema_path = schema_path;
      if (tau_opt) cfg.nsd_tau_mm = *tau_opt;
      return report_outcomes(run_evaluate(pred_dir, ref_dir, out_dir, cfg));
    }
    if (app.got_subcommand(phm)) {
      std::optional<PhantomSpec> spec;
      if (!spec_path.empty()) {
        spec = PhantomSpec::from_json_text(read_text_file(spec_path));
      } else if (!dims_opt.empty() || noise_sigma != 0.0 || seed != 7) {
        std::array<std::int64_t, 3> dims = {256, 256, 128};
        if (!dims_opt.empty()) dims = {dims_opt[0], dims_opt[1], dims_opt[2]};
        spec = head_neck_preset(dims, {1.0, 1.0, 3.0}, noise_sigma, seed);
      }
      return report_outcomes(run_phantom(out_dir, spec, case_id));
    }
    if (app.got_subcommand(pln)) {
      PipelineConfig cfg = load_config();
      std::string text = plan_json(emit_plan(cfg.task));
      if (plan_out.empty()) {
        std::cout << text << "\n";
      } else {
        auto bytes = std::as_bytes(std::span(text.data(), text.size()));
        write_file_bytes(plan_out, bytes);
        std::cout << "plan written to " << plan_out << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
