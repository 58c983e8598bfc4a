#include "segpipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "segpipe/nifti.hpp"

namespace segpipe {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

// Strip ".nii" / ".nii.gz" from a filename.
std::string strip_nii(std::string name) {
  auto drop = [&](const char* suffix) {
    std::size_t n = std::strlen(suffix);
    if (name.size() > n && name.compare(name.size() - n, n, suffix) == 0)
      name.resize(name.size() - n);
  };
  drop(".gz");
  drop(".nii");
  return name;
}

bool is_nii(const fs::path& p) {
  std::string name = p.filename().string();
  return name.size() > 4 &&
         (name.ends_with(".nii") || name.ends_with(".nii.gz"));
}

// Run fn(case_index) on a pool; outcomes land in slot order.
template <typename Fn>
std::vector<CaseOutcome> pooled(std::size_t n, int workers, Fn fn) {
  std::vector<CaseOutcome> outcomes(n);
  if (n == 0) return outcomes;
  int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      outcomes[i] = fn(i);
    }
  };
  if (nthreads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  std::sort(outcomes.begin(), outcomes.end(),
            [](const CaseOutcome& a, const CaseOutcome& b) {
              return a.case_id < b.case_id;
            });
  return outcomes;
}

LabelSchema schema_for(const PipelineConfig& config) {
  if (!config.labels_schema_path.empty())
    return LabelSchema::from_json_text(read_text(config.labels_schema_path));
  return config.task == Task::Oars ? default_oars_schema() : default_gtvs_schema();
}

Volume read_label_volume(const fs::path& path) {
  Volume v = read_volume(path);
  if (v.kind() == VoxelKind::Label) return v;
  return v.to_label();
}

std::string connectivity_to_string(Connectivity c) {
  return c == Connectivity::Six ? "6" : "26";
}

Connectivity connectivity_from_int(int c) {
  if (c == 6) return Connectivity::Six;
  if (c == 26) return Connectivity::TwentySix;
  throw ParameterError("connectivity must be 6 or 26");
}

}  // namespace

void PipelineConfig::validate() const {
  if (crop.margin_px < 0) throw ValidationError("config: crop.margin_px must be >= 0");
  if (!(nsd_tau_mm > 0.0)) throw ValidationError("config: nsd_tau_mm must be > 0");
  if (workers < 1) throw ValidationError("config: workers must be >= 1");
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PipelineConfig c;
  if (j.contains("task")) c.task = task_from_string(j.at("task").get<std::string>());
  if (j.contains("windows")) c.windows = WindowTable::from_json_text(j.at("windows").dump());
  if (j.contains("crop")) {
    const auto& jc = j.at("crop");
    if (jc.contains("threshold_hu")) c.crop.threshold_hu = jc.at("threshold_hu").get<double>();
    if (jc.contains("margin_px")) c.crop.margin_px = jc.at("margin_px").get<std::int64_t>();
    if (jc.contains("connectivity"))
      c.crop.connectivity = connectivity_from_int(jc.at("connectivity").get<int>());
    if (jc.contains("full_z")) c.crop.full_z = jc.at("full_z").get<bool>();
  }
  if (j.contains("labels_schema"))
    c.labels_schema_path = j.at("labels_schema").get<std::string>();
  if (j.contains("nsd_tau_mm")) c.nsd_tau_mm = j.at("nsd_tau_mm").get<double>();
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("zscore")) c.zscore = j.at("zscore").get<bool>();
  if (j.contains("patterns")) {
    const auto& jp = j.at("patterns");
    if (jp.contains("contrast")) c.patterns.contrast = jp.at("contrast").get<std::string>();
    if (jp.contains("plain")) c.patterns.plain = jp.at("plain").get<std::string>();
    if (jp.contains("label")) c.patterns.label = jp.at("label").get<std::string>();
  }
  c.validate();
  return c;
}

std::string PipelineConfig::to_json_text() const {
  nlohmann::json j;
  j["task"] = task_name(task);
  j["windows"] = nlohmann::json::parse(windows.to_json_text());
  j["crop"] = {{"threshold_hu", crop.threshold_hu},
               {"margin_px", crop.margin_px},
               {"connectivity", std::stoi(connectivity_to_string(crop.connectivity))},
               {"full_z", crop.full_z}};
  j["labels_schema"] = labels_schema_path;
  j["nsd_tau_mm"] = nsd_tau_mm;
  j["workers"] = workers;
  j["zscore"] = zscore;
  j["patterns"] = {{"contrast", patterns.contrast},
                   {"plain", patterns.plain},
                   {"label", patterns.label}};
  return j.dump(2);
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return from_json_text(read_text(path));
}

bool glob_match(const std::string& pattern, const std::string& text,
                std::string* capture) {
  // recursive, shortest match for the first star
  std::function<bool(std::size_t, std::size_t, bool)> rec =
      [&](std::size_t pi, std::size_t ti, bool captured) -> bool {
    while (pi < pattern.size() && pattern[pi] != '*') {
      if (ti >= text.size() || pattern[pi] != text[ti]) return false;
      ++pi;
      ++ti;
    }
    if (pi == pattern.size()) return ti == text.size();
    // pattern[pi] == '*'
    for (std::size_t take = 0; ti + take <= text.size(); ++take) {
      if (rec(pi + 1, ti + take, true)) {
        if (!captured && capture) *capture = text.substr(ti, take);
        return true;
      }
    }
    return false;
  };
  return rec(0, 0, false);
}

std::vector<CaseFiles> discover_cases(const fs::path& dir, const FilePatterns& patterns) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, CaseFiles> by_id;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());

  for (const auto& path : entries) {
    std::string name = path.filename().string();
    std::string id;
    if (glob_match(patterns.contrast, name, &id)) {
      by_id[id].case_id = id;
      by_id[id].contrast = path;
    } else if (glob_match(patterns.plain, name, &id)) {
      by_id[id].case_id = id;
      by_id[id].plain = path;
    } else if (glob_match(patterns.label, name, &id)) {
      by_id[id].case_id = id;
      by_id[id].label = path;
    }
  }
  std::vector<CaseFiles> cases;
  for (auto& [id, c] : by_id)
    if (!c.contrast.empty() && !c.plain.empty()) cases.push_back(std::move(c));
  return cases;
}

std::map<std::string, fs::path> discover_label_files(const fs::path& dir,
                                                     const FilePatterns& patterns) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_nii(e.path())) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  for (const auto& path : entries) {
    std::string name = path.filename().string();
    std::string id;
    if (!glob_match(patterns.label, name, &id)) id = strip_nii(name);
    out[id] = path;
  }
  return out;
}

std::vector<CaseOutcome> run_preprocess(const fs::path& input_dir,
                                        const fs::path& output_dir,
                                        const PipelineConfig& config) {
  config.validate();
  auto cases = discover_cases(input_dir, config.patterns);
  fs::create_directories(output_dir);
  IntensityWindow wc = config.windows.window_for(config.task, Modality::Contrast);
  IntensityWindow wp = config.windows.window_for(config.task, Modality::Plain);

  return pooled(cases.size(), config.workers, [&](std::size_t i) {
    const CaseFiles& cf = cases[i];
    CaseOutcome o{cf.case_id, true, ""};
    try {
      PairedCase pair = validate_pair(read_volume(cf.contrast), read_volume(cf.plain),
                                      cf.case_id);
      Volume c = clamp_window(pair.contrast_ct, wc);
      Volume p = clamp_window(pair.plain_ct, wp);
      if (config.zscore) {
        c = zscore(c);
        p = zscore(p);
      }
      write_volume(output_dir / cf.contrast.filename(), c);
      write_volume(output_dir / cf.plain.filename(), p);
      if (!cf.label.empty())
        fs::copy_file(cf.label, output_dir / cf.label.filename(),
                      fs::copy_options::overwrite_existing);
      std::ostringstream msg;
      msg << "contrast window [" << wc.lo << ", " << wc.hi << "], plain window ["
          << wp.lo << ", " << wp.hi << "]";
      if (config.zscore) msg << ", zscored";
      o.message = msg.str();
    } catch (const std::exception& e) {
      o.ok = false;
      o.message = e.what();
    }
    return o;
  });
}

std::vector<CaseOutcome> run_crop(const fs::path& input_dir, const fs::path& output_dir,
                                  const PipelineConfig& config) {
  config.validate();
  auto cases = discover_cases(input_dir, config.patterns);
  fs::create_directories(output_dir);

  return pooled(cases.size(), config.workers, [&](std::size_t i) {
    const CaseFiles& cf = cases[i];
    CaseOutcome o{cf.case_id, true, ""};
    try {
      Volume contrast = read_volume(cf.contrast);
      Volume mask = body_mask_threshold(contrast, config.crop.threshold_hu);
      ComponentLabeling cc = label_components(mask, config.crop.connectivity);
      Volume head = largest_component(cc);  // EmptyMaskError on blank masks
      BBox box = fit_bbox(head, config.crop.margin_px, config.crop.full_z);

      auto [cropped_contrast, rec] = crop(contrast, box, cf.case_id);
      rec.margin_used = config.crop.margin_px;
      write_volume(output_dir / cf.contrast.filename(), cropped_contrast);

      Volume plain = read_volume(cf.plain);
      if (plain.geometry().dims != contrast.geometry().dims)
        throw GeometryError("case " + cf.case_id + ": modalities have different dims");
      write_volume(output_dir / cf.plain.filename(), crop(plain, box).first);
      if (!cf.label.empty()) {
        Volume label = read_label_volume(cf.label);
        if (label.geometry().dims != contrast.geometry().dims)
          throw GeometryError("case " + cf.case_id + ": label dims differ from CT dims");
        write_volume(output_dir / cf.label.filename(), crop(label, box).first);
      }
      write_text(output_dir / (cf.case_id + ".crop.json"), rec.to_json_text());

      std::ostringstream msg;
      msg << "bbox [" << box.lo[0] << "," << box.lo[1] << "," << box.lo[2] << "]..["
          << box.hi[0] << "," << box.hi[1] << "," << box.hi[2] << "] margin "
          << config.crop.margin_px;
      o.message = msg.str();
    } catch (const std::exception& e) {
      o.ok = false;
      o.message = e.what();
    }
    return o;
  });
}

std::vector<CaseOutcome> run_restore(const fs::path& pred_dir, const fs::path& records_dir,
                                     const fs::path& output_dir,
                                     const PipelineConfig& config) {
  config.validate();
  auto preds = discover_label_files(pred_dir, config.patterns);
  fs::create_directories(output_dir);

  std::vector<std::pair<std::string, fs::path>> items(preds.begin(), preds.end());
  return pooled(items.size(), config.workers, [&](std::size_t i) {
    const auto& [case_id, path] = items[i];
    CaseOutcome o{case_id, true, ""};
    try {
      fs::path rec_path = records_dir / (case_id + ".crop.json");
      if (!fs::exists(rec_path))
        throw RecordMismatchError("no crop record for case " + case_id + " at " +
                                  rec_path.string());
      CropRecord rec = CropRecord::from_json_text(read_text(rec_path));
      Volume restored = restore(read_label_volume(path), rec);
      write_volume(output_dir / path.filename(), restored);
      o.message = "restored to [" + std::to_string(rec.original_dims[0]) + "," +
                  std::to_string(rec.original_dims[1]) + "," +
                  std::to_string(rec.original_dims[2]) + "]";
    } catch (const std::exception& e) {
      o.ok = false;
      o.message = e.what();
    }
    return o;
  });
}

std::vector<CaseOutcome> run_merge_labels(const fs::path& input_dir,
                                          const fs::path& output_dir,
                                          const LabelSchema& schema,
                                          const PipelineConfig& config) {
  config.validate();
  MergeMap mm = schema.merge_map();
  auto files = discover_label_files(input_dir, config.patterns);
  fs::create_directories(output_dir);

  std::vector<std::pair<std::string, fs::path>> items(files.begin(), files.end());
  return pooled(items.size(), config.workers, [&](std::size_t i) {
    const auto& [case_id, path] = items[i];
    CaseOutcome o{case_id, true, ""};
    try {
      Volume merged = apply_merge(read_label_volume(path), mm);
      write_volume(output_dir / path.filename(), merged);
      o.message = "merged " + std::to_string(mm.mapping.size()) + " source labels";
    } catch (const std::exception& e) {
      o.ok = false;
      o.message = e.what();
    }
    return o;
  });
}

std::vector<CaseOutcome> run_evaluate(const fs::path& pred_dir, const fs::path& ref_dir,
                                      const fs::path& output_dir,
                                      const PipelineConfig& config,
                                      MetricsReport* report_out) {
  config.validate();
  auto preds = discover_label_files(pred_dir, config.patterns);
  auto refs = discover_label_files(ref_dir, config.patterns);

  std::vector<std::string> only_pred, only_ref;
  for (const auto& [id, _] : preds)
    if (!refs.count(id)) only_pred.push_back(id);
  for (const auto& [id, _] : refs)
    if (!preds.count(id)) only_ref.push_back(id);
  if (!only_pred.empty() || !only_ref.empty()) {
    std::ostringstream os;
    os << "evaluate: case sets do not match;";
    if (!only_pred.empty()) {
      os << " only in predictions:";
      for (const auto& id : only_pred) os << ' ' << id;
      os << ';';
    }
    if (!only_ref.empty()) {
      os << " only in references:";
      for (const auto& id : only_ref) os << ' ' << id;
    }
    throw ValidationError(os.str());
  }

  bool use_schema = !config.labels_schema_path.empty();
  LabelSchema schema = schema_for(config);
  std::optional<MergeMap> mm;
  if (use_schema) mm = schema.merge_map();

  fs::create_directories(output_dir);
  std::vector<std::pair<std::string, fs::path>> items(preds.begin(), preds.end());
  std::vector<CaseScores> all_scores(items.size());

  auto outcomes = pooled(items.size(), config.workers, [&](std::size_t i) {
    const auto& [case_id, pred_path] = items[i];
    CaseOutcome o{case_id, true, ""};
    try {
      Volume pred = read_label_volume(pred_path);
      Volume ref = read_label_volume(refs.at(case_id));
      if (mm) {
        pred = apply_merge(pred, *mm);
        ref = apply_merge(ref, *mm);
      }
      std::vector<std::int64_t> ids;
      if (use_schema) {
        ids = schema.target_ids();
      } else {
        std::set<std::int64_t> present;
        for (const auto& [id, n] : inventory(pred).counts) present.insert(id);
        for (const auto& [id, n] : inventory(ref).counts) present.insert(id);
        ids.assign(present.begin(), present.end());
      }
      auto scores = evaluate_case(pred, ref, ids, config.nsd_tau_mm);
      all_scores[i] = CaseScores{case_id, std::move(scores)};
      o.message = "scored " + std::to_string(ids.size()) + " structures";
    } catch (const std::exception& e) {
      o.ok = false;
      o.message = e.what();
    }
    return o;
  });

  std::vector<CaseScores> ok_scores;
  for (auto& cs : all_scores)
    if (!cs.case_id.empty() && !cs.scores.empty()) ok_scores.push_back(std::move(cs));

  if (!ok_scores.empty()) {
    MetricsReport report = build_report(std::move(ok_scores), config.nsd_tau_mm);
    std::map<std::int64_t, std::string> names;
    for (const auto& t : schema.targets) names[t.id] = t.name;
    write_text(output_dir / "report.json", report_json(report, names));
    write_text(output_dir / "report.csv", report_csv(report, names));
    if (report_out) *report_out = std::move(report);
  }
  return outcomes;
}

std::vector<CaseOutcome> run_phantom(const fs::path& output_dir,
                                     const std::optional<PhantomSpec>& spec,
                                     const std::string& case_id) {
  PhantomSpec s = spec ? *spec : head_neck_preset();
  CaseOutcome o{case_id, true, ""};
  try {
    PhantomVolumes vols = generate(s);
    fs::create_directories(output_dir);
    write_volume(output_dir / (case_id + "_contrast.nii.gz"), vols.contrast_ct);
    write_volume(output_dir / (case_id + "_plain.nii.gz"), vols.plain_ct);
    write_volume(output_dir / (case_id + "_label.nii.gz"), vols.labels);
    write_volume(output_dir / (case_id + "_body.nii.gz"), vols.body_mask);
    write_text(output_dir / (case_id + ".phantom.json"), s.to_json_text());
    std::ostringstream msg;
    msg << "dims [" << s.dims[0] << "," << s.dims[1] << "," << s.dims[2]
        << "], noise sigma " << s.noise_sigma << ", seed " << s.seed;
    o.message = msg.str();
  } catch (const std::exception& e) {
    o.ok = false;
    o.message = e.what();
  }
  return {o};
}

TrainingPlan emit_plan(Task task) {
  TrainingPlan p;
  p.task = task_name(task);
  p.trainer_class = "nnUnetTrainerV2";
  p.objective = "Dice + BCE";
  p.optimizer = "SGD";
  p.base_feature_maps = 32;
  p.poolings_per_axis = {4, 5, 5};
  p.train_batches_per_epoch = 250;
  p.val_batches_per_epoch = 50;
  p.initial_lr = 0.01;
  p.batch_size = 2;
  p.folds = 5;
  if (task == Task::Oars) {
    p.augmentation = "True except for the flipping";
    p.patch_size = {64, 192, 160};
    p.epochs = 2500;
  } else {
    p.augmentation = "True";
    p.patch_size = {80, 192, 128};
    p.epochs = 700;
    p.notes.push_back("epochs reported as both 600 and 700; 700 adopted");
  }
  return p;
}

std::string plan_json(const TrainingPlan& p) {
  nlohmann::json j;
  j["task"] = p.task;
  j["trainer_class"] = p.trainer_class;
  j["objective"] = p.objective;
  j["optimizer"] = p.optimizer;
  j["augmentation"] = p.augmentation;
  j["patch_size"] = {p.patch_size[0], p.patch_size[1], p.patch_size[2]};
  j["base_feature_maps"] = p.base_feature_maps;
  j["poolings_per_axis"] = {p.poolings_per_axis[0], p.poolings_per_axis[1],
                            p.poolings_per_axis[2]};
  j["epochs"] = p.epochs;
  j["train_batches_per_epoch"] = p.train_batches_per_epoch;
  j["val_batches_per_epoch"] = p.val_batches_per_epoch;
  j["initial_lr"] = p.initial_lr;
  j["batch_size"] = p.batch_size;
  j["folds"] = p.folds;
  j["notes"] = p.notes;
  return j.dump(2);
}

}  // namespace segpipe
