#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segpipe/intensity.hpp"
#include "segpipe/label_ops.hpp"
#include "segpipe/metrics.hpp"
#include "segpipe/phantom.hpp"
#include "segpipe/roi_crop.hpp"

namespace segpipe {

struct CropSettings {
  double threshold_hu = -500.0;
  std::int64_t margin_px = 15;
  Connectivity connectivity = Connectivity::TwentySix;
  bool full_z = true;
  bool operator==(const CropSettings&) const = default;
};

/// Filename patterns with '*' wildcards; the first '*' captures the case
/// id.
struct FilePatterns {
  std::string contrast = "*_contrast.nii*";
  std::string plain = "*_plain.nii*";
  std::string label = "*_label.nii*";
  bool operator==(const FilePatterns&) const = default;
};

struct PipelineConfig {
  Task task = Task::Oars;
  WindowTable windows;
  CropSettings crop;
  std::string labels_schema_path;  // empty = no schema
  double nsd_tau_mm = 2.0;
  int workers = 1;
  bool zscore = false;
  FilePatterns patterns;

  void validate() const;
  static PipelineConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  static PipelineConfig load(const std::filesystem::path& path);
  bool operator==(const PipelineConfig&) const = default;
};

/// Single '*'-wildcard glob. When `capture` is given it receives the text
/// matched by the first star (shortest match).
bool glob_match(const std::string& pattern, const std::string& text,
                std::string* capture = nullptr);

struct CaseFiles {
  std::string case_id;
  std::filesystem::path contrast;
  std::filesystem::path plain;
  std::filesystem::path label;  // empty when absent
};

/// Scan a directory for bi-modal cases. Cases missing either modality are
/// skipped.
std::vector<CaseFiles> discover_cases(const std::filesystem::path& dir,
                                      const FilePatterns& patterns);

/// Label volumes keyed by case id: the label pattern first, otherwise any
/// .nii/.nii.gz with the case id taken from the stem.
std::map<std::string, std::filesystem::path> discover_label_files(
    const std::filesystem::path& dir, const FilePatterns& patterns);

struct CaseOutcome {
  std::string case_id;
  bool ok = true;
  std::string message;
};

/// Batch runners. Each processes cases on a worker pool (config.workers)
/// and returns one outcome per case, sorted by case id. Failures are
/// per-case; the batch always runs to completion.
std::vector<CaseOutcome> run_preprocess(const std::filesystem::path& input_dir,
                                        const std::filesystem::path& output_dir,
                                        const PipelineConfig& config);
std::vector<CaseOutcome> run_crop(const std::filesystem::path& input_dir,
                                  const std::filesystem::path& output_dir,
                                  const PipelineConfig& config);
std::vector<CaseOutcome> run_restore(const std::filesystem::path& pred_dir,
                                     const std::filesystem::path& records_dir,
                                     const std::filesystem::path& output_dir,
                                     const PipelineConfig& config);
std::vector<CaseOutcome> run_merge_labels(const std::filesystem::path& input_dir,
                                          const std::filesystem::path& output_dir,
                                          const LabelSchema& schema,
                                          const PipelineConfig& config);
/// Evaluate matched prediction/reference cases and write report.json and
/// report.csv into output_dir. Unmatched case sets raise ValidationError
/// listing the difference.
std::vector<CaseOutcome> run_evaluate(const std::filesystem::path& pred_dir,
                                      const std::filesystem::path& ref_dir,
                                      const std::filesystem::path& output_dir,
                                      const PipelineConfig& config,
                                      MetricsReport* report_out = nullptr);

/// Generate a phantom case (preset unless a spec is given) and write the
/// four volumes plus the spec used.
std::vector<CaseOutcome> run_phantom(const std::filesystem::path& output_dir,
                                     const std::optional<PhantomSpec>& spec,
                                     const std::string& case_id);

/// Training protocol emitted for the external segmentation trainer.
struct TrainingPlan {
  std::string task;
  std::string trainer_class;
  std::string objective;
  std::string optimizer;
  std::string augmentation;
  std::array<int, 3> patch_size{0, 0, 0};
  int base_feature_maps = 0;
  std::array<int, 3> poolings_per_axis{0, 0, 0};
  int epochs = 0;
  int train_batches_per_epoch = 0;
  int val_batches_per_epoch = 0;
  double initial_lr = 0.0;
  int batch_size = 0;
  int folds = 0;
  std::vector<std::string> notes;
};

TrainingPlan emit_plan(Task task);
std::string plan_json(const TrainingPlan& plan);

}  // namespace segpipe
