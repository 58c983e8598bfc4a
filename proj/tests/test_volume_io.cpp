#include <doctest.h>

#include <cstring>
#include <random>

#include "segpipe/nifti.hpp"
#include "segpipe/volume.hpp"

using namespace segpipe;

namespace {

GridGeometry simple_geom(std::int64_t nx, std::int64_t ny, std::int64_t nz,
                         std::array<double, 3> spacing = {1, 1, 1}) {
  GridGeometry g;
  g.dims = {nx, ny, nz};
  g.spacing = spacing;
  return g;
}

// little-endian pokes for hand-built fixtures
void put16(std::vector<std::byte>& b, std::size_t off, std::uint16_t v) {
  b[off] = static_cast<std::byte>(v & 0xff);
  b[off + 1] = static_cast<std::byte>(v >> 8);
}
void put32(std::vector<std::byte>& b, std::size_t off, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[off + i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
}
void putf32(std::vector<std::byte>& b, std::size_t off, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put32(b, off, u);
}

// 4x4x4 int16 volume, spacing (0.5, 0.5, 3.0), built from the header
// layout by hand so it checks the parser against the format itself.
std::vector<std::byte> handmade_i16_fixture() {
  std::vector<std::byte> b(352 + 64 * 2, std::byte{0});
  put32(b, 0, 348);
  put16(b, 40, 3);  // dim[0]
  put16(b, 42, 4);
  put16(b, 44, 4);
  put16(b, 46, 4);
  for (int a = 4; a <= 7; ++a) put16(b, 40 + 2 * a, 1);
  put16(b, 70, 4);   // DT_INT16
  put16(b, 72, 16);  // bitpix
  putf32(b, 76, 1.0f);
  putf32(b, 80, 0.5f);
  putf32(b, 84, 0.5f);
  putf32(b, 88, 3.0f);
  putf32(b, 108, 352.0f);  // vox_offset
  b[344] = std::byte{'n'};
  b[345] = std::byte{'+'};
  b[346] = std::byte{'1'};
  for (int i = 0; i < 64; ++i)
    put16(b, 352 + 2 * i, static_cast<std::uint16_t>(static_cast<std::int16_t>(i - 10)));
  return b;
}

bool float_equal_geometry(const GridGeometry& a, const GridGeometry& b) {
  if (a.dims != b.dims) return false;
  for (int i = 0; i < 3; ++i) {
    if (static_cast<float>(a.spacing[i]) != static_cast<float>(b.spacing[i])) return false;
    if (static_cast<float>(a.origin[i]) != static_cast<float>(b.origin[i])) return false;
  }
  for (int i = 0; i < 9; ++i)
    if (std::abs(a.orientation[i] - b.orientation[i]) > 1e-6) return false;
  return true;
}

}  // namespace

TEST_CASE("geometry invariants") {
  GridGeometry g = simple_geom(2, 2, 2);
  g.validate();

  GridGeometry bad = g;
  bad.dims[1] = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = g;
  bad.spacing[0] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = g;
  bad.orientation = {2, 0, 0, 0, 1, 0, 0, 0, 1};  // non-unit column
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  bad = g;
  bad.orientation = {1, 1, 0, 1, 1, 0, 0, 0, 1};  // singular
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("handmade int16 fixture parses") {
  Volume v = parse_nifti(handmade_i16_fixture());
  CHECK(v.dims() == std::array<std::int64_t, 3>{4, 4, 4});
  CHECK(v.spacing()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v.spacing()[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(v.spacing()[2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(v.dtype() == DataType::Int16);
  CHECK(v.voxels()[0] == -10.0);
  CHECK(v.voxels()[63] == 53.0);
}

TEST_CASE("round trip is bit exact for every supported dtype") {
  std::mt19937_64 rng(42);
  auto geom = simple_geom(5, 4, 3, {0.5, 0.75, 3.0});

  auto check_roundtrip = [&](Volume v) {
    Volume back = parse_nifti(write_nifti(v));
    CHECK(back.dtype() == v.dtype());
    CHECK(back.kind() == v.kind());
    CHECK(float_equal_geometry(back.geometry(), v.geometry()));
    REQUIRE(back.voxels().size() == v.voxels().size());
    for (std::size_t i = 0; i < v.voxels().size(); ++i)
      CHECK(back.voxels()[i] == v.voxels()[i]);
  };

  SUBCASE("uint8") {
    Volume v = Volume::label(geom, DataType::UInt8);
    std::uniform_int_distribution<int> d(0, 255);
    for (auto& x : v.voxels()) x = d(rng);
    check_roundtrip(v);
  }
  SUBCASE("int16") {
    Volume v = Volume::intensity(geom, DataType::Int16);
    std::uniform_int_distribution<int> d(-32768, 32767);
    for (auto& x : v.voxels()) x = d(rng);
    check_roundtrip(v);
  }
  SUBCASE("int32") {
    Volume v = Volume::label(geom, DataType::Int32);
    std::uniform_int_distribution<std::int32_t> d(0, 2147483647);
    for (auto& x : v.voxels()) x = d(rng);
    check_roundtrip(v);
  }
  SUBCASE("float32") {
    Volume v = Volume::intensity(geom, DataType::Float32);
    std::uniform_real_distribution<float> d(-1000.0f, 2000.0f);
    for (auto& x : v.voxels()) x = d(rng);
    check_roundtrip(v);
  }
  SUBCASE("float64") {
    Volume v = Volume::intensity(geom, DataType::Float64);
    std::uniform_real_distribution<double> d(-1e9, 1e9);
    for (auto& x : v.voxels()) x = d(rng);
    check_roundtrip(v);
  }
}

TEST_CASE("label volume with values 0..54 round trips") {
  Volume v = Volume::label(simple_geom(55, 1, 1), DataType::Int16);
  for (std::int64_t i = 0; i < 55; ++i) v.at(i, 0, 0) = static_cast<double>(i);
  Volume back = parse_nifti(write_nifti(v));
  CHECK(back.kind() == VoxelKind::Label);
  for (std::int64_t i = 0; i < 55; ++i) CHECK(back.at(i, 0, 0) == static_cast<double>(i));
}

TEST_CASE("single voxel volume") {
  Volume v = Volume::intensity(simple_geom(1, 1, 1));
  v.at(0, 0, 0) = 7.0;
  Volume back = parse_nifti(write_nifti(v));
  CHECK(back.voxels()[0] == 7.0);
}

TEST_CASE("non-representable voxels fall back to float64 storage") {
  Volume v = Volume::intensity(simple_geom(2, 1, 1), DataType::Float32);
  v.at(0, 0, 0) = 0.1;  // not a float32 value
  v.at(1, 0, 0) = 2.0;
  Volume back = parse_nifti(write_nifti(v));
  CHECK(back.dtype() == DataType::Float64);
  CHECK(back.voxels()[0] == 0.1);
}

TEST_CASE("rejections") {
  SUBCASE("352 zero bytes") {
    std::vector<std::byte> zeros(352, std::byte{0});
    CHECK_THROWS_AS(parse_nifti(zeros), FormatError);
  }
  SUBCASE("short input") {
    std::vector<std::byte> tiny(100, std::byte{0});
    CHECK_THROWS_AS(parse_nifti(tiny), TruncationError);
  }
  SUBCASE("detached ni1 magic") {
    auto b = handmade_i16_fixture();
    b[344] = std::byte{'n'};
    b[345] = std::byte{'i'};
    b[346] = std::byte{'1'};
    CHECK_THROWS_AS(parse_nifti(b), FormatError);
  }
  SUBCASE("unsupported datatype") {
    auto b = handmade_i16_fixture();
    put16(b, 70, 512);  // uint16
    put16(b, 72, 16);
    CHECK_THROWS_AS(parse_nifti(b), UnsupportedError);
  }
  SUBCASE("4d volume") {
    auto b = handmade_i16_fixture();
    put16(b, 40, 4);
    put16(b, 48, 2);  // dim[4] = 2
    CHECK_THROWS_AS(parse_nifti(b), UnsupportedError);
  }
}

TEST_CASE("writer rejects dims beyond the 16-bit header fields") {
  GridGeometry g = simple_geom(70000, 1, 1);
  Volume v = Volume::intensity(g);
  CHECK_THROWS_AS(write_nifti(v), CapacityError);
}

TEST_CASE("fuzzed truncation never yields a volume") {
  auto full = handmade_i16_fixture();
  for (std::size_t len = 0; len < full.size(); ++len) {
    std::vector<std::byte> cut(full.begin(), full.begin() + len);
    CHECK_THROWS_AS(parse_nifti(cut), Error);
  }
}

TEST_CASE("big-endian header is detected and decoded") {
  auto le = handmade_i16_fixture();
  std::vector<std::byte> be = le;
  auto swap_at = [&](std::size_t off, std::size_t width) {
    for (std::size_t i = 0; i < width / 2; ++i)
      std::swap(be[off + i], be[off + width - 1 - i]);
  };
  swap_at(0, 4);
  for (int a = 0; a <= 7; ++a) swap_at(40 + 2 * a, 2);
  swap_at(70, 2);
  swap_at(72, 2);
  for (int a = 0; a <= 7; ++a) swap_at(76 + 4 * a, 4);
  swap_at(108, 4);
  swap_at(112, 4);
  swap_at(116, 4);
  for (int i = 0; i < 64; ++i) swap_at(352 + 2 * i, 2);

  Volume vle = parse_nifti(le);
  Volume vbe = parse_nifti(be);
  CHECK(vbe.dims() == vle.dims());
  for (std::size_t i = 0; i < vle.voxels().size(); ++i)
    CHECK(vbe.voxels()[i] == vle.voxels()[i]);
}

TEST_CASE("scale slope and intercept are applied") {
  auto b = handmade_i16_fixture();
  putf32(b, 112, 2.0f);   // slope
  putf32(b, 116, 10.0f);  // inter
  Volume v = parse_nifti(b);
  CHECK(v.voxels()[0] == 2.0 * -10.0 + 10.0);

  // slope 0 is identity
  putf32(b, 112, 0.0f);
  putf32(b, 116, 99.0f);
  Volume v2 = parse_nifti(b);
  CHECK(v2.voxels()[0] == -10.0);
}

TEST_CASE("gzip round trip and truncation") {
  Volume v = Volume::intensity(simple_geom(6, 5, 4), DataType::Float32);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> d(-500.0f, 500.0f);
  for (auto& x : v.voxels()) x = d(rng);

  auto raw = write_nifti(v);
  auto packed = gzip_compress(raw);
  CHECK(looks_gzip(packed));
  Volume back = parse_nifti(packed);
  for (std::size_t i = 0; i < v.voxels().size(); ++i)
    CHECK(back.voxels()[i] == v.voxels()[i]);

  std::vector<std::byte> cut(packed.begin(), packed.begin() + packed.size() / 2);
  CHECK_THROWS_AS(parse_nifti(cut), Error);
}

TEST_CASE("file io with and without gzip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "segpipe_io_test";
  fs::create_directories(dir);

  Volume v = Volume::label(simple_geom(3, 3, 3), DataType::UInt8);
  v.at(1, 1, 1) = 4.0;

  write_volume(dir / "a.nii", v);
  write_volume(dir / "a.nii.gz", v);
  CHECK(read_volume(dir / "a.nii") == v);
  CHECK(read_volume(dir / "a.nii.gz") == v);
  CHECK(fs::file_size(dir / "a.nii") > fs::file_size(dir / "a.nii.gz"));
  fs::remove_all(dir);
}

TEST_CASE("pair validation") {
  auto geom = simple_geom(8, 8, 4, {0.433, 0.433, 3.0});
  Volume a = Volume::intensity(geom);
  Volume b = Volume::intensity(geom);

  SUBCASE("identical geometry is accepted") {
    PairedCase pc = validate_pair(a, b, "case01");
    CHECK(pc.case_id == "case01");
  }
  SUBCASE("dims mismatch names the axis") {
    Volume c = Volume::intensity(simple_geom(8, 8, 5, {0.433, 0.433, 3.0}));
    try {
      validate_pair(a, c, "case01");
      FAIL("expected GeometryError");
    } catch (const GeometryError& e) {
      CHECK(std::string(e.what()).find('z') != std::string::npos);
    }
  }
  SUBCASE("spacing deviation beyond 1e-3 mm is a registration error") {
    // 0.434 - 0.433 lands just above 1e-3 in doubles, so this pair is out
    Volume c = Volume::intensity(simple_geom(8, 8, 4, {0.434, 0.434, 3.0}));
    CHECK_THROWS_AS(validate_pair(a, c, "case01"), RegistrationError);
    // a deviation well inside the tolerance is accepted
    Volume d = Volume::intensity(simple_geom(8, 8, 4, {0.4334, 0.433, 3.0}));
    CHECK_NOTHROW(validate_pair(a, d, "case01"));
  }
  SUBCASE("acceptance is symmetric") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      std::uniform_real_distribution<double> sp(0.43, 0.44);
      Volume x = Volume::intensity(simple_geom(4, 4, 4, {sp(rng), 0.5, 3.0}));
      Volume y = Volume::intensity(simple_geom(4, 4, 4, {sp(rng), 0.5, 3.0}));
      bool xy = true, yx = true;
      try {
        validate_pair(x, y, "t");
      } catch (const Error&) {
        xy = false;
      }
      try {
        validate_pair(y, x, "t");
      } catch (const Error&) {
        yx = false;
      }
      CHECK(xy == yx);
    }
  }
}

TEST_CASE("label volumes reject non-integer voxels") {
  Volume v = Volume::intensity(simple_geom(2, 1, 1));
  v.at(0, 0, 0) = 1.5;
  CHECK_THROWS_AS(v.to_label(), ValidationError);
  v.at(0, 0, 0) = -1.0;
  CHECK_THROWS_AS(v.to_label(), ValidationError);
}
