#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lpp/raster.hpp"

namespace lpp::io {

/// Native raster file: a 32-byte little-endian header
///   0  "LPPR"        4  u16 version (1)   6  u8 plane   7  u8 kind
///   8  u32 width    12  u32 height       16  f64 pixel size (m or 1/m)
///  24  8 reserved bytes (zero)
/// followed by width*height float32 values, row-major, little-endian.
void write_raster(const RasterImage& image, const std::filesystem::path& path);

/// Reads a native raster, or an MRC-2014 file (detected by content).
RasterImage read_raster(const std::filesystem::path& path);

/// MRC-2014, mode 2 (float32), single section. Pixel size is stored in
/// Angstrom in the cell dimensions.
void write_mrc(const RasterImage& image, const std::filesystem::path& path);
RasterImage read_mrc(const std::filesystem::path& path);

std::vector<unsigned char> encode_raster(const RasterImage& image);
RasterImage decode_raster(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_mrc(const RasterImage& image);
RasterImage decode_mrc(std::span<const unsigned char> bytes);

/// Two-column CSV with a header row; values use 17 significant digits.
void write_profile_csv(std::span<const double> x, std::span<const double> y,
                       const std::string& x_name, const std::string& y_name,
                       const std::filesystem::path& path);
/// Columns of a numeric CSV with one header row.
std::vector<std::vector<double>> read_csv_columns(const std::filesystem::path& path,
                                                  std::vector<std::string>* header = nullptr);
/// Raster as a CSV matrix, one line per image row.
void write_raster_csv(const RasterImage& image, const std::filesystem::path& path);

enum class GrayScaling { min_max, percentile_1_99 };

/// 8-bit gray levels. A constant image (or a degenerate percentile range)
/// maps to mid-gray 128.
std::vector<std::uint8_t> to_gray(const RasterImage& image, GrayScaling scaling);
void write_pgm(const RasterImage& image, const std::filesystem::path& path, GrayScaling scaling);
void write_png(const RasterImage& image, const std::filesystem::path& path, GrayScaling scaling);

/// Writes to a temporary file in the destination directory, then renames.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);
void atomic_write(const std::filesystem::path& path, std::span<const unsigned char> bytes);

std::vector<unsigned char> read_file(const std::filesystem::path& path);
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace lpp::io
