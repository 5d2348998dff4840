#include "dsct/io.hpp"

#include "dsct/error.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include <unistd.h>

namespace dsct::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in native little-endian order");

namespace {

constexpr std::string_view kImageMagic = "DSCTIMG ";
constexpr std::string_view kSinoMagic = "DSCTSINO";

template <typename T>
void put(std::string& out, T value)
{
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

class Reader {
public:
    Reader(std::string_view bytes, std::string_view source) : bytes_(bytes), source_(source) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    void magic(std::string_view expected)
    {
        need(expected.size());
        if (bytes_.substr(pos_, expected.size()) != expected)
            fail("bad magic, expected \"" + std::string(expected) + "\"");
        pos_ += expected.size();
    }

    void payload(std::span<double> out)
    {
        const std::size_t n = out.size() * sizeof(double);
        if (bytes_.size() - pos_ != n) {
            std::ostringstream msg;
            msg << "payload is " << bytes_.size() - pos_ << " bytes, header implies " << n;
            fail(msg.str());
        }
        if (n > 0)
            std::memcpy(out.data(), bytes_.data() + pos_, n);
        pos_ += n;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw DataError(std::string(source_) + ": " + what);
    }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            fail("truncated header");
    }

    std::string_view bytes_;
    std::string_view source_;
    std::size_t pos_ = 0;
};

void check_version(const Reader& reader, std::uint32_t version)
{
    if (version != kFormatVersion)
        reader.fail("unsupported format version " + std::to_string(version));
}

} // namespace

void write_atomic(const std::filesystem::path& path, std::string_view bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot create " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw DataError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw DataError("cannot rename into " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
}

std::string encode_image(const Image& image)
{
    std::string out;
    out.reserve(32 + image.size() * sizeof(double));
    out.append(kImageMagic);
    put(out, kFormatVersion);
    put(out, static_cast<std::uint32_t>(image.width()));
    put(out, static_cast<std::uint32_t>(image.height()));
    put(out, image.pixel_cm());
    for (double v : image.values())
        put(out, v);
    return out;
}

Image decode_image(std::string_view bytes, std::string_view source)
{
    Reader reader(bytes, source);
    reader.magic(kImageMagic);
    check_version(reader, reader.get<std::uint32_t>());
    const auto width = reader.get<std::uint32_t>();
    const auto height = reader.get<std::uint32_t>();
    const auto pixel_cm = reader.get<double>();
    if (!(pixel_cm > 0.0) || !std::isfinite(pixel_cm))
        reader.fail("pixel size must be positive");
    Image image(width, height, 0.0, pixel_cm);
    reader.payload(image.values());
    return image;
}

void write_image(const std::filesystem::path& path, const Image& image)
{
    write_atomic(path, encode_image(image));
}

Image read_image(const std::filesystem::path& path)
{
    return decode_image(read_file(path), path.string());
}

std::string encode_sinogram(const Sinogram& sino)
{
    std::string out;
    out.reserve(20 + sino.size() * sizeof(double));
    out.append(kSinoMagic);
    put(out, kFormatVersion);
    put(out, static_cast<std::uint32_t>(sino.n_views()));
    put(out, static_cast<std::uint32_t>(sino.n_channels()));
    for (double v : sino.values())
        put(out, v);
    return out;
}

Sinogram decode_sinogram(std::string_view bytes, std::string_view source)
{
    Reader reader(bytes, source);
    reader.magic(kSinoMagic);
    check_version(reader, reader.get<std::uint32_t>());
    const auto n_views = reader.get<std::uint32_t>();
    const auto n_channels = reader.get<std::uint32_t>();
    Sinogram sino(n_views, n_channels);
    reader.payload(sino.values());
    return sino;
}

void write_sinogram(const std::filesystem::path& path, const Sinogram& sino)
{
    write_atomic(path, encode_sinogram(sino));
}

Sinogram read_sinogram(const std::filesystem::path& path)
{
    return decode_sinogram(read_file(path), path.string());
}

std::string format_double(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string sinogram_csv(const Sinogram& sino)
{
    std::string out;
    for (std::size_t v = 0; v < sino.n_views(); ++v) {
        for (std::size_t c = 0; c < sino.n_channels(); ++c) {
            if (c > 0)
                out += ',';
            out += format_double(sino.at(v, c));
        }
        out += '\n';
    }
    return out;
}

DisplayWindow write_pgm16(const std::filesystem::path& path, const Image& image,
                          std::optional<DisplayWindow> window)
{
    if (image.size() == 0)
        throw DataError("pgm export: empty image");
    const DisplayWindow w = window ? *window : DisplayWindow{image.min(), image.max()};
    if (!std::isfinite(w.min) || !std::isfinite(w.max) || w.max < w.min)
        throw ConfigError("pgm export: window must be finite with max >= min");

    std::string out = "P5\n" + std::to_string(image.width()) + " " +
                      std::to_string(image.height()) + "\n65535\n";
    const double span = w.max - w.min;
    // PGM rows run top to bottom; image rows grow with +y.
    for (std::size_t row = 0; row < image.height(); ++row) {
        const std::size_t iy = image.height() - 1 - row;
        for (std::size_t ix = 0; ix < image.width(); ++ix) {
            double t = span > 0.0 ? (image.at(ix, iy) - w.min) / span : 0.0;
            t = std::isnan(t) ? 0.0 : std::clamp(t, 0.0, 1.0);
            const auto level = static_cast<std::uint16_t>(std::lround(t * 65535.0));
            out += static_cast<char>(level >> 8);
            out += static_cast<char>(level & 0xff);
        }
    }
    write_atomic(path, out);

    std::filesystem::path sidecar = path;
    sidecar += ".window";
    write_atomic(sidecar, "min " + format_double(w.min) + "\nmax " + format_double(w.max) + "\n");
    return w;
}

std::string diagnostics_header(bool with_rmse, bool filtered)
{
    std::string header = "iteration,residual_low,residual_high,skipped_rays";
    if (with_rmse) {
        header += ",rmse_f1,rmse_f2";
        if (filtered)
            header += ",rmse_f1_filtered,rmse_f2_filtered";
    }
    return header + "\n";
}

std::string diagnostics_csv(std::span<const IterationDiagnostics> rows, bool filtered)
{
    const bool with_rmse = !rows.empty() && rows.front().rmse_f1.has_value();
    std::string out = diagnostics_header(with_rmse, filtered);
    for (const auto& d : rows) {
        out += std::to_string(d.iteration) + "," + format_double(d.residual_low) + "," +
               format_double(d.residual_high) + "," + std::to_string(d.skipped_rays);
        if (with_rmse) {
            out += "," + format_double(d.rmse_f1.value_or(NAN)) + "," +
                   format_double(d.rmse_f2.value_or(NAN));
            if (filtered)
                out += "," + format_double(d.rmse_f1_filtered.value_or(NAN)) + "," +
                       format_double(d.rmse_f2_filtered.value_or(NAN));
        }
        out += "\n";
    }
    return out;
}

std::string sha256_hex(std::string_view bytes)
{
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
        throw Error("sha256: digest computation failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path)
{
    return sha256_hex(read_file(path));
}

} // namespace dsct::io
