#pragma once

#include "dsct/esart.hpp"
#include "dsct/image.hpp"
#include "dsct/sinogram.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsct::io {

inline constexpr std::uint32_t kFormatVersion = 1;

/// Writes bytes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// DSCTIMG: magic "DSCTIMG ", u32 version, u32 width, u32 height, f64 pixel_cm, f64 row-major.
std::string encode_image(const Image& image);
Image decode_image(std::string_view bytes, std::string_view source);
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);

/// DSCTSINO: magic "DSCTSINO", u32 version, u32 n_views, u32 n_channels, f64 view-major.
std::string encode_sinogram(const Sinogram& sino);
Sinogram decode_sinogram(std::string_view bytes, std::string_view source);
void write_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram read_sinogram(const std::filesystem::path& path);

/// One line per view, channels comma-separated.
std::string sinogram_csv(const Sinogram& sino);

struct DisplayWindow {
    double min = 0.0;
    double max = 1.0;
};

/**
 * 16-bit binary PGM scaled linearly from the window to [0, 65535], values
 * outside clipped. The window defaults to the image min/max and is written
 * to `<path>.window` as "min <v>" / "max <v>" lines.
 */
DisplayWindow write_pgm16(const std::filesystem::path& path, const Image& image,
                          std::optional<DisplayWindow> window = std::nullopt);

/// Diagnostics header; the filtered columns are present only when `filtered` is set.
std::string diagnostics_header(bool with_rmse, bool filtered);
std::string diagnostics_csv(std::span<const IterationDiagnostics> rows, bool filtered);

/// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite values.
std::string format_double(double value);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace dsct::io
