#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

/// Decode a single-file NIfTI-1 byte stream (gzip accepted, detected by
/// magic). Little- and big-endian headers are both read; the byte order
/// is inferred from the header-size field. Supported voxel types: uint8,
/// int16, int32, float32, float64. Scale slope/intercept is applied when
/// non-identity (slope 0 counts as identity). Volumes written with a
/// label intent come back as label volumes.
Volume parse_nifti(std::span<const std::byte> bytes);

/// Encode as single-file NIfTI-1 (little-endian, sform only). Voxels are
/// stored with the volume's dtype; if any value is not exactly
/// representable there the stream falls back to float64 so that
/// parse_nifti(write_nifti(v)) reproduces every voxel bit for bit.
/// Dims beyond the format's 16-bit fields raise CapacityError.
std::vector<std::byte> write_nifti(const Volume& v);

/// File helpers. A ".gz" suffix selects gzip compression on write; reads
/// sniff the content.
Volume read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume& v);

std::vector<std::byte> gzip_compress(std::span<const std::byte> in, int level = 6);
std::vector<std::byte> gzip_decompress(std::span<const std::byte> in);
bool looks_gzip(std::span<const std::byte> bytes);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace segpipe
