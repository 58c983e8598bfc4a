#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "segpipe/nifti.hpp"
#include "segpipe/pipeline.hpp"

using namespace segpipe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("segpipe_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int failures(const std::vector<CaseOutcome>& outcomes) {
  int n = 0;
  for (const auto& o : outcomes)
    if (!o.ok) ++n;
  return n;
}

}  // namespace

TEST_CASE("glob matching and capture") {
  std::string id;
  CHECK(glob_match("*_contrast.nii.gz", "case01_contrast.nii.gz", &id));
  CHECK(id == "case01");
  CHECK(glob_match("*_contrast.nii*", "case01_contrast.nii", &id));
  CHECK(id == "case01");
  CHECK(glob_match("*_contrast.nii*", "case01_contrast.nii.gz", &id));
  CHECK(id == "case01");
  CHECK_FALSE(glob_match("*_contrast.nii*", "case01_plain.nii.gz"));
  CHECK(glob_match("abc", "abc"));
  CHECK_FALSE(glob_match("abc", "abx"));
}

TEST_CASE("config json round trip and validation") {
  PipelineConfig c;
  c.task = Task::Gtvs;
  c.crop.threshold_hu = -350.0;
  c.crop.margin_px = 10;
  c.crop.connectivity = Connectivity::Six;
  c.crop.full_z = false;
  c.labels_schema_path = "labels.json";
  c.nsd_tau_mm = 3.5;
  c.workers = 4;
  c.zscore = true;
  c.patterns.contrast = "*_ce.nii*";
  c.windows.set(Task::Gtvs, Modality::Contrast, {-500.0, 500.0});

  PipelineConfig back = PipelineConfig::from_json_text(c.to_json_text());
  CHECK(back == c);

  PipelineConfig bad;
  bad.workers = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = PipelineConfig{};
  bad.nsd_tau_mm = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = PipelineConfig{};
  bad.crop.margin_px = -1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("training plan emission") {
  TrainingPlan oars = emit_plan(Task::Oars);
  CHECK(oars.trainer_class == "nnUnetTrainerV2");
  CHECK(oars.objective == "Dice + BCE");
  CHECK(oars.optimizer == "SGD");
  CHECK(oars.augmentation == "True except for the flipping");
  CHECK(oars.patch_size == std::array<int, 3>{64, 192, 160});
  CHECK(oars.base_feature_maps == 32);
  CHECK(oars.poolings_per_axis == std::array<int, 3>{4, 5, 5});
  CHECK(oars.epochs == 2500);
  CHECK(oars.train_batches_per_epoch == 250);
  CHECK(oars.val_batches_per_epoch == 50);
  CHECK(oars.initial_lr == 0.01);
  CHECK(oars.batch_size == 2);
  CHECK(oars.folds == 5);

  TrainingPlan gtvs = emit_plan(Task::Gtvs);
  CHECK(gtvs.patch_size == std::array<int, 3>{80, 192, 128});
  CHECK(gtvs.epochs == 700);
  CHECK(gtvs.augmentation == "True");
  CHECK(gtvs.objective == "Dice + BCE");
  REQUIRE(gtvs.notes.size() == 1);

  std::string j = plan_json(oars);
  CHECK(j.find("\"epochs\": 2500") != std::string::npos);
  CHECK(j.find("\"initial_lr\": 0.01") != std::string::npos);
}

TEST_CASE("batch pipeline on a small phantom") {
  TempDir raw("raw");
  TempDir pre("pre");
  TempDir cropped("cropped");
  TempDir segdir("seg");
  TempDir restored("restored");
  TempDir refdir("ref");
  TempDir report("report");

  PhantomSpec spec = head_neck_preset({64, 64, 32});
  REQUIRE(failures(run_phantom(raw.path, spec, "case01")) == 0);
  CHECK(fs::exists(raw.path / "case01_contrast.nii.gz"));
  CHECK(fs::exists(raw.path / "case01_plain.nii.gz"));
  CHECK(fs::exists(raw.path / "case01_label.nii.gz"));

  PipelineConfig cfg;
  cfg.task = Task::Gtvs;

  SUBCASE("preprocess applies the task windows and is idempotent") {
    auto outcomes = run_preprocess(raw.path, pre.path, cfg);
    REQUIRE(failures(outcomes) == 0);
    CHECK(outcomes[0].message.find("[-1000, 1000]") != std::string::npos);
    CHECK(outcomes[0].message.find("[-600, 600]") != std::string::npos);

    Volume plain = read_volume(pre.path / "case01_plain.nii.gz");
    double lo = 1e9, hi = -1e9;
    for (double x : plain.voxels()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    CHECK(lo >= -600.0);
    CHECK(hi <= 600.0);

    TempDir pre2("pre2");
    REQUIRE(failures(run_preprocess(pre.path, pre2.path, cfg)) == 0);
    CHECK(read_volume(pre2.path / "case01_contrast.nii.gz") ==
          read_volume(pre.path / "case01_contrast.nii.gz"));
  }

  SUBCASE("full chain: preprocess, crop, segment, restore, evaluate") {
    REQUIRE(failures(run_preprocess(raw.path, pre.path, cfg)) == 0);
    auto crop_outcomes = run_crop(pre.path, cropped.path, cfg);
    REQUIRE(failures(crop_outcomes) == 0);
    CHECK(fs::exists(cropped.path / "case01.crop.json"));

    // crop extents: body bounds widened by the margin in x/y, full z
    CropRecord rec = CropRecord::from_json_text([&] {
      std::ifstream f(cropped.path / "case01.crop.json");
      std::stringstream ss;
      ss << f.rdbuf();
      return ss.str();
    }());
    PhantomVolumes truth = generate(spec);
    std::array<std::int64_t, 3> lo{64, 64, 32}, hi{0, 0, 0};
    for (std::int64_t z = 0; z < 32; ++z)
      for (std::int64_t y = 0; y < 64; ++y)
        for (std::int64_t x = 0; x < 64; ++x)
          if (truth.body_mask.at(x, y, z) != 0.0) {
            lo = {std::min(lo[0], x), std::min(lo[1], y), std::min(lo[2], z)};
            hi = {std::max(hi[0], x), std::max(hi[1], y), std::max(hi[2], z)};
          }
    CHECK(rec.bbox.lo[0] == std::max<std::int64_t>(0, lo[0] - 15));
    CHECK(rec.bbox.hi[0] == std::min<std::int64_t>(63, hi[0] + 15));
    CHECK(rec.bbox.lo[1] == std::max<std::int64_t>(0, lo[1] - 15));
    CHECK(rec.bbox.hi[1] == std::min<std::int64_t>(63, hi[1] + 15));
    CHECK(rec.bbox.lo[2] == 0);
    CHECK(rec.bbox.hi[2] == 31);
    CHECK(rec.margin_used == 15);

    // oracle segmentation on the cropped contrast volume
    Volume cropped_ct = read_volume(cropped.path / "case01_contrast.nii.gz");
    auto rules = head_neck_preset_rules();
    Volume seg = threshold_segment(cropped_ct, rules);
    write_volume(segdir.path / "case01_label.nii.gz", seg);

    REQUIRE(failures(run_restore(segdir.path, cropped.path, restored.path, cfg)) == 0);
    Volume full = read_volume(restored.path / "case01_label.nii.gz");
    CHECK(full.dims() == std::array<std::int64_t, 3>{64, 64, 32});

    write_volume(refdir.path / "case01_label.nii.gz", truth.labels);
    MetricsReport mr;
    REQUIRE(failures(run_evaluate(restored.path, refdir.path, report.path, cfg, &mr)) == 0);
    CHECK(fs::exists(report.path / "report.json"));
    CHECK(fs::exists(report.path / "report.csv"));
    CHECK(mr.totals.overall.dice.mean == 1.0);
    CHECK(mr.totals.overall.nsd.mean == 1.0);
  }

  SUBCASE("evaluating a directory against itself scores 1.0") {
    write_volume(refdir.path / "case01_label.nii.gz",
                 read_volume(raw.path / "case01_label.nii.gz"));
    MetricsReport mr;
    REQUIRE(failures(run_evaluate(refdir.path, refdir.path, report.path, cfg, &mr)) == 0);
    CHECK(mr.totals.overall.dice.mean == 1.0);
  }

  SUBCASE("unmatched case sets raise an error listing the difference") {
    write_volume(refdir.path / "case01_label.nii.gz",
                 read_volume(raw.path / "case01_label.nii.gz"));
    write_volume(refdir.path / "case02_label.nii.gz",
                 read_volume(raw.path / "case01_label.nii.gz"));
    write_volume(report.path / "case01_label.nii.gz",
                 read_volume(raw.path / "case01_label.nii.gz"));
    try {
      run_evaluate(report.path, refdir.path, report.path, cfg);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("case02") != std::string::npos);
    }
  }

  SUBCASE("empty body mask is a per-case error, batch continues") {
    GridGeometry g;
    g.dims = {8, 8, 4};
    Volume air = Volume::intensity(g, DataType::Float32);
    for (auto& x : air.voxels()) x = -1000.0;
    write_volume(raw.path / "case00_contrast.nii.gz", air);
    write_volume(raw.path / "case00_plain.nii.gz", air);

    auto outcomes = run_crop(raw.path, cropped.path, cfg);
    REQUIRE(outcomes.size() == 2);
    CHECK(outcomes[0].case_id == "case00");
    CHECK_FALSE(outcomes[0].ok);
    CHECK(outcomes[1].case_id == "case01");
    CHECK(outcomes[1].ok);
  }

  SUBCASE("restore without a record is a per-case error") {
    write_volume(segdir.path / "case01_label.nii.gz",
                 read_volume(raw.path / "case01_label.nii.gz"));
    auto outcomes = run_restore(segdir.path, refdir.path, restored.path, cfg);
    REQUIRE(outcomes.size() == 1);
    CHECK_FALSE(outcomes[0].ok);
    CHECK(outcomes[0].message.find("case01") != std::string::npos);
  }

  SUBCASE("parallel workers give the same bytes as one worker") {
    PipelineConfig cfg4 = cfg;
    cfg4.workers = 4;
    TempDir pre_a("pre_a");
    TempDir pre_b("pre_b");
    REQUIRE(failures(run_preprocess(raw.path, pre_a.path, cfg)) == 0);
    REQUIRE(failures(run_preprocess(raw.path, pre_b.path, cfg4)) == 0);
    auto bytes_a = read_file_bytes(pre_a.path / "case01_contrast.nii.gz");
    auto bytes_b = read_file_bytes(pre_b.path / "case01_contrast.nii.gz");
    CHECK(bytes_a == bytes_b);
  }
}

TEST_CASE("merge labels over a directory") {
  TempDir in("merge_in");
  TempDir out("merge_out");

  GridGeometry g;
  g.dims = {54, 1, 1};
  Volume v = Volume::label(g, DataType::Int16);
  for (std::int64_t x = 0; x < 54; ++x) v.at(x, 0, 0) = static_cast<double>(x + 1);
  write_volume(in.path / "caseA_label.nii.gz", v);

  PipelineConfig cfg;
  auto outcomes = run_merge_labels(in.path, out.path, default_oars_schema(), cfg);
  REQUIRE(failures(outcomes) == 0);
  Volume merged = read_volume(out.path / "caseA_label.nii.gz").to_label();
  LabelInventory inv = inventory(merged);
  CHECK(inv.counts.size() == 45);
  CHECK(inv.total() == 54);
}

TEST_CASE("case discovery") {
  TempDir dir("discover");
  GridGeometry g;
  g.dims = {2, 2, 2};
  Volume v = Volume::intensity(g);
  write_volume(dir.path / "a_contrast.nii.gz", v);
  write_volume(dir.path / "a_plain.nii.gz", v);
  write_volume(dir.path / "a_label.nii.gz", v.to_label());
  write_volume(dir.path / "b_contrast.nii.gz", v);  // missing plain
  write_volume(dir.path / "notes.nii.gz", v);       // matches nothing

  FilePatterns patterns;
  auto cases = discover_cases(dir.path, patterns);
  REQUIRE(cases.size() == 1);
  CHECK(cases[0].case_id == "a");
  CHECK_FALSE(cases[0].label.empty());

  auto labels = discover_label_files(dir.path, patterns);
  // a_label matches the pattern; every other nii falls back to its stem
  CHECK(labels.count("a"));
  CHECK(labels.count("notes"));
}
