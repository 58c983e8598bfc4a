#include "segpipe/nifti.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace segpipe {

namespace {

// NIfTI-1 header layout (348 bytes). Offsets of the fields we touch:
//   0   int32   sizeof_hdr      (348; also the endianness probe)
//   40  int16   dim[8]
//   68  int16   intent_code
//   70  int16   datatype
//   72  int16   bitpix
//   76  f32     pixdim[8]       (pixdim[0] = qfac)
//   108 f32     vox_offset
//   112 f32     scl_slope
//   116 f32     scl_inter
//   123 int8    xyzt_units
//   148 char    descrip[80]
//   252 int16   qform_code
//   254 int16   sform_code
//   256 f32     quatern_b,c,d
//   268 f32     qoffset_x,y,z
//   280 f32     srow_x[4], srow_y[4], srow_z[4]
//   344 char    magic[4]        ("n+1\0" single file, "ni1\0" detached)

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kMinFileSize = 352;  // header + extender
constexpr std::int16_t kIntentLabel = 1002;

constexpr std::int16_t kDtUInt8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;

std::uint16_t bswap16(std::uint16_t v) {
  return static_cast<std::uint16_t>((v >> 8) | (v << 8));
}
std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000FF00u) | ((v << 8) & 0x00FF0000u) | (v << 24);
}
std::uint64_t bswap64(std::uint64_t v) {
  return (static_cast<std::uint64_t>(bswap32(static_cast<std::uint32_t>(v))) << 32) |
         bswap32(static_cast<std::uint32_t>(v >> 32));
}

struct Reader {
  std::span<const std::byte> bytes;
  bool swap = false;

  std::uint8_t u8(std::size_t off) const {
    return static_cast<std::uint8_t>(bytes[off]);
  }
  std::uint16_t u16(std::size_t off) const {
    std::uint16_t v;
    std::memcpy(&v, bytes.data() + off, 2);
    return swap ? bswap16(v) : v;
  }
  std::int16_t i16(std::size_t off) const {
    return static_cast<std::int16_t>(u16(off));
  }
  std::uint32_t u32(std::size_t off) const {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return swap ? bswap32(v) : v;
  }
  std::int32_t i32(std::size_t off) const {
    return static_cast<std::int32_t>(u32(off));
  }
  float f32(std::size_t off) const { return std::bit_cast<float>(u32(off)); }
  double f64(std::size_t off) const {
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + off, 8);
    if (swap) v = bswap64(v);
    return std::bit_cast<double>(v);
  }
};

struct Writer {
  std::vector<std::byte> bytes;

  explicit Writer(std::size_t n) : bytes(n, std::byte{0}) {}

  void u16(std::size_t off, std::uint16_t v) { std::memcpy(bytes.data() + off, &v, 2); }
  void i16(std::size_t off, std::int16_t v) { u16(off, static_cast<std::uint16_t>(v)); }
  void u32(std::size_t off, std::uint32_t v) { std::memcpy(bytes.data() + off, &v, 4); }
  void i32(std::size_t off, std::int32_t v) { u32(off, static_cast<std::uint32_t>(v)); }
  void f32(std::size_t off, float v) { u32(off, std::bit_cast<std::uint32_t>(v)); }
  void f64(std::size_t off, double v) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    std::memcpy(bytes.data() + off, &u, 8);
  }
  void text(std::size_t off, const char* s, std::size_t max) {
    std::size_t n = std::min(std::strlen(s), max);
    std::memcpy(bytes.data() + off, s, n);
  }
};

static_assert(std::endian::native == std::endian::little,
              "writer assumes a little-endian host");

DataType dtype_from_code(std::int16_t code) {
  switch (code) {
    case kDtUInt8: return DataType::UInt8;
    case kDtInt16: return DataType::Int16;
    case kDtInt32: return DataType::Int32;
    case kDtFloat32: return DataType::Float32;
    case kDtFloat64: return DataType::Float64;
    default: {
      std::ostringstream os;
      os << "nifti: unsupported datatype code " << code;
      throw UnsupportedError(os.str());
    }
  }
}

std::int16_t code_from_dtype(DataType t) {
  switch (t) {
    case DataType::UInt8: return kDtUInt8;
    case DataType::Int16: return kDtInt16;
    case DataType::Int32: return kDtInt32;
    case DataType::Float32: return kDtFloat32;
    case DataType::Float64: return kDtFloat64;
  }
  return 0;
}

bool representable(double x, DataType t) {
  switch (t) {
    case DataType::UInt8:
      return x == std::floor(x) && x >= 0.0 && x <= 255.0;
    case DataType::Int16:
      return x == std::floor(x) && x >= -32768.0 && x <= 32767.0;
    case DataType::Int32:
      return x == std::floor(x) && x >= -2147483648.0 && x <= 2147483647.0;
    case DataType::Float32:
      return static_cast<double>(static_cast<float>(x)) == x;
    case DataType::Float64:
      return true;
  }
  return false;
}

// Direction columns from the sform rows; falls back to the quaternion
// form, then to identity. Spacing always comes from pixdim.
void decode_placement(const Reader& r, GridGeometry& g) {
  std::int16_t sform = r.i16(254);
  std::int16_t qform = r.i16(252);
  if (sform > 0) {
    double srow[3][4];
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 4; ++col)
        srow[row][col] = r.f32(280 + (row * 4 + col) * 4);
    bool usable = true;
    for (int c = 0; c < 3 && usable; ++c) {
      double n2 = srow[0][c] * srow[0][c] + srow[1][c] * srow[1][c] +
                  srow[2][c] * srow[2][c];
      if (!(n2 > 0.0) || !std::isfinite(n2)) usable = false;
    }
    if (usable) {
      for (int row = 0; row < 3; ++row) {
        for (int c = 0; c < 3; ++c)
          g.orientation[row * 3 + c] = srow[row][c] / g.spacing[c];
        g.origin[row] = srow[row][3];
      }
      return;
    }
  }
  if (qform > 0) {
    double b = r.f32(256), c = r.f32(260), d = r.f32(264);
    double a2 = 1.0 - (b * b + c * c + d * d);
    double a = a2 > 0.0 ? std::sqrt(a2) : 0.0;
    double qfac = r.f32(76) < 0.0f ? -1.0 : 1.0;
    double m[9] = {
        a * a + b * b - c * c - d * d, 2 * b * c - 2 * a * d, 2 * b * d + 2 * a * c,
        2 * b * c + 2 * a * d, a * a + c * c - b * b - d * d, 2 * c * d - 2 * a * b,
        2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b, a * a + d * d - c * c - b * b};
    for (int i = 0; i < 9; ++i) g.orientation[i] = m[i];
    g.orientation[2] *= qfac;
    g.orientation[5] *= qfac;
    g.orientation[8] *= qfac;
    g.origin = {r.f32(268), r.f32(272), r.f32(276)};
  }
  // neither form: identity orientation, zero origin
}

}  // namespace

bool looks_gzip(std::span<const std::byte> bytes) {
  return bytes.size() >= 2 && static_cast<std::uint8_t>(bytes[0]) == 0x1f &&
         static_cast<std::uint8_t>(bytes[1]) == 0x8b;
}

std::vector<std::byte> gzip_decompress(std::span<const std::byte> in) {
  z_stream strm{};
  if (inflateInit2(&strm, 15 + 32) != Z_OK)  // zlib or gzip wrapper
    throw IoError("gzip: inflateInit failed");
  std::vector<std::byte> out;
  out.reserve(in.size() * 4);
  std::byte buf[1 << 16];
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(in.data()));
  strm.avail_in = static_cast<uInt>(in.size());
  int ret = Z_OK;
  do {
    strm.next_out = reinterpret_cast<Bytef*>(buf);
    strm.avail_out = sizeof(buf);
    ret = inflate(&strm, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&strm);
      throw FormatError("gzip: corrupt stream");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - strm.avail_out));
  } while (ret != Z_STREAM_END && strm.avail_in > 0);
  inflateEnd(&strm);
  if (ret != Z_STREAM_END)
    throw TruncationError("gzip: truncated stream");
  return out;
}

std::vector<std::byte> gzip_compress(std::span<const std::byte> in, int level) {
  z_stream strm{};
  if (deflateInit2(&strm, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("gzip: deflateInit failed");
  std::vector<std::byte> out;
  std::byte buf[1 << 16];
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<std::byte*>(in.data()));
  strm.avail_in = static_cast<uInt>(in.size());
  int ret = Z_OK;
  do {
    strm.next_out = reinterpret_cast<Bytef*>(buf);
    strm.avail_out = sizeof(buf);
    ret = deflate(&strm, Z_FINISH);
    out.insert(out.end(), buf, buf + (sizeof(buf) - strm.avail_out));
  } while (ret != Z_STREAM_END);
  deflateEnd(&strm);
  return out;
}

Volume parse_nifti(std::span<const std::byte> bytes) {
  std::vector<std::byte> inflated;
  if (looks_gzip(bytes)) {
    inflated = gzip_decompress(bytes);
    bytes = inflated;
  }
  if (bytes.size() < kMinFileSize)
    throw TruncationError("nifti: input shorter than header + extender");

  Reader r{bytes, false};
  std::int32_t hdr = r.i32(0);
  if (hdr != 348) {
    r.swap = true;
    hdr = r.i32(0);
    if (hdr != 348)
      throw FormatError("nifti: header size field is not 348 in either byte order");
  }

  char magic[4];
  std::memcpy(magic, bytes.data() + 344, 4);
  if (std::memcmp(magic, "ni1", 4) == 0)
    throw FormatError("nifti: detached header/data pairs are not supported");
  if (std::memcmp(magic, "n+1", 4) != 0)
    throw FormatError("nifti: bad magic");

  std::int16_t ndim = r.i16(40);
  if (ndim < 1 || ndim > 7)
    throw FormatError("nifti: dim[0] out of range");
  std::int64_t dims[3] = {1, 1, 1};
  for (int a = 0; a < 3 && a < ndim; ++a) {
    std::int16_t d = r.i16(40 + 2 * (a + 1));
    if (d < 1) throw FormatError("nifti: non-positive dimension");
    dims[a] = d;
  }
  for (int a = 3; a < ndim; ++a) {
    std::int16_t d = r.i16(40 + 2 * (a + 1));
    if (d > 1)
      throw UnsupportedError("nifti: volumes with more than three dimensions");
  }

  DataType dtype = dtype_from_code(r.i16(70));
  std::int16_t bitpix = r.i16(72);
  if (bitpix != static_cast<std::int16_t>(byte_width(dtype) * 8))
    throw FormatError("nifti: bitpix disagrees with datatype");

  GridGeometry g;
  g.dims = {dims[0], dims[1], dims[2]};
  for (int a = 0; a < 3; ++a) {
    float p = r.f32(76 + 4 * (a + 1));
    if (!(p > 0.0f) || !std::isfinite(p))
      throw FormatError("nifti: non-positive pixdim");
    g.spacing[a] = p;
  }
  decode_placement(r, g);
  g.validate();

  double vox_offset_f = r.f32(108);
  if (!(vox_offset_f >= static_cast<double>(kMinFileSize)) ||
      vox_offset_f != std::floor(vox_offset_f))
    throw FormatError("nifti: bad vox_offset");
  std::size_t vox_offset = static_cast<std::size_t>(vox_offset_f);

  std::size_t nvox = static_cast<std::size_t>(g.voxel_count());
  std::size_t need = vox_offset + nvox * byte_width(dtype);
  if (bytes.size() < need) {
    std::ostringstream os;
    os << "nifti: data section truncated (have " << bytes.size() << " bytes, need "
       << need << ")";
    throw TruncationError(os.str());
  }

  float slope = r.f32(112);
  float inter = r.f32(116);
  bool scale = slope != 0.0f && !(slope == 1.0f && inter == 0.0f);

  VoxelKind kind = r.i16(68) == kIntentLabel ? VoxelKind::Label : VoxelKind::Intensity;
  Volume v(g, kind, dtype);
  auto out = v.voxels();
  const std::size_t base = vox_offset;
  switch (dtype) {
    case DataType::UInt8:
      for (std::size_t i = 0; i < nvox; ++i) out[i] = r.u8(base + i);
      break;
    case DataType::Int16:
      for (std::size_t i = 0; i < nvox; ++i) out[i] = r.i16(base + 2 * i);
      break;
    case DataType::Int32:
      for (std::size_t i = 0; i < nvox; ++i) out[i] = r.i32(base + 4 * i);
      break;
    case DataType::Float32:
      for (std::size_t i = 0; i < nvox; ++i) out[i] = r.f32(base + 4 * i);
      break;
    case DataType::Float64:
      for (std::size_t i = 0; i < nvox; ++i) out[i] = r.f64(base + 8 * i);
      break;
  }
  if (scale) {
    double s = slope, b = inter;
    for (double& x : out) x = s * x + b;
  }
  if (kind == VoxelKind::Label) {
    for (double x : out)
      if (!(x >= 0.0) || x != std::floor(x))
        throw FormatError("nifti: label-intent volume holds non-integer voxels");
  }
  return v;
}

std::vector<std::byte> write_nifti(const Volume& v) {
  v.validate();
  const auto& g = v.geometry();
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] > 32767) {
      std::ostringstream os;
      os << "nifti: dimension " << g.dims[a]
         << " exceeds the format's 16-bit dim field";
      throw CapacityError(os.str());
    }
  }

  DataType dtype = v.dtype();
  if (dtype != DataType::Float64) {
    for (double x : v.voxels()) {
      if (!representable(x, dtype)) {
        dtype = DataType::Float64;  // keep the round trip exact
        break;
      }
    }
  }

  std::size_t nvox = static_cast<std::size_t>(v.voxel_count());
  std::size_t width = byte_width(dtype);
  Writer w(kMinFileSize + nvox * width);

  w.i32(0, 348);
  w.bytes[38] = std::byte{'r'};  // regular
  w.i16(40, 3);
  for (int a = 0; a < 3; ++a) w.i16(42 + 2 * a, static_cast<std::int16_t>(g.dims[a]));
  for (int a = 4; a <= 7; ++a) w.i16(40 + 2 * a, 1);
  if (v.kind() == VoxelKind::Label) w.i16(68, kIntentLabel);
  w.i16(70, code_from_dtype(dtype));
  w.i16(72, static_cast<std::int16_t>(width * 8));
  w.f32(76, 1.0f);  // qfac
  for (int a = 0; a < 3; ++a) w.f32(76 + 4 * (a + 1), static_cast<float>(g.spacing[a]));
  w.f32(108, static_cast<float>(kMinFileSize));
  w.f32(112, 1.0f);  // slope
  w.f32(116, 0.0f);  // inter
  w.bytes[123] = std::byte{2};  // NIFTI_UNITS_MM
  w.text(148, "segpipe", 79);
  w.i16(252, 0);  // qform unused
  w.i16(254, 1);  // sform
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 3; ++c)
      w.f32(280 + (row * 4 + c) * 4,
            static_cast<float>(g.orientation[row * 3 + c] * g.spacing[c]));
    w.f32(280 + (row * 4 + 3) * 4, static_cast<float>(g.origin[row]));
  }
  w.text(344, "n+1", 4);

  auto in = v.voxels();
  const std::size_t base = kMinFileSize;
  switch (dtype) {
    case DataType::UInt8:
      for (std::size_t i = 0; i < nvox; ++i)
        w.bytes[base + i] = static_cast<std::byte>(static_cast<std::uint8_t>(in[i]));
      break;
    case DataType::Int16:
      for (std::size_t i = 0; i < nvox; ++i)
        w.i16(base + 2 * i, static_cast<std::int16_t>(in[i]));
      break;
    case DataType::Int32:
      for (std::size_t i = 0; i < nvox; ++i)
        w.i32(base + 4 * i, static_cast<std::int32_t>(in[i]));
      break;
    case DataType::Float32:
      for (std::size_t i = 0; i < nvox; ++i)
        w.f32(base + 4 * i, static_cast<float>(in[i]));
      break;
    case DataType::Float64:
      for (std::size_t i = 0; i < nvox; ++i) w.f64(base + 8 * i, in[i]);
      break;
  }
  return std::move(w.bytes);
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  f.seekg(0, std::ios::end);
  std::streamoff n = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(static_cast<std::size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

Volume read_volume(const std::filesystem::path& path) {
  return parse_nifti(read_file_bytes(path));
}

void write_volume(const std::filesystem::path& path, const Volume& v) {
  auto bytes = write_nifti(v);
  if (path.extension() == ".gz") {
    auto packed = gzip_compress(bytes);
    write_file_bytes(path, packed);
  } else {
    write_file_bytes(path, bytes);
  }
}

}  // namespace segpipe
