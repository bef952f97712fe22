#include "lpp/io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

#include "lpp/errors.hpp"

namespace lpp::io {

namespace fs = std::filesystem;

namespace {

template <typename T>
T byteswap_value(T v)
{
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
}

template <typename T>
void put_le(std::vector<unsigned char>& out, std::size_t offset, T v)
{
    if constexpr (std::endian::native == std::endian::big)
        v = byteswap_value(v);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::copy(b, b + sizeof(T), out.begin() + static_cast<std::ptrdiff_t>(offset));
}

template <typename T>
T get(std::span<const unsigned char> in, std::size_t offset, bool little_endian = true)
{
    T v;
    std::memcpy(&v, in.data() + offset, sizeof(T));
    const bool native_little = std::endian::native == std::endian::little;
    if (native_little != little_endian)
        v = byteswap_value(v);
    return v;
}

std::string offset_message(const std::string& what, std::size_t offset)
{
    std::ostringstream msg;
    msg << what << " (at byte offset " << offset << ")";
    return msg.str();
}

constexpr std::size_t native_header = 32;
constexpr std::size_t mrc_header = 1024;

}  // namespace

std::vector<unsigned char> encode_raster(const RasterImage& image)
{
    detail::require(image.width() > 0 && image.height() > 0, "cannot encode an empty raster");
    detail::require(image.width() <= UINT32_MAX && image.height() <= UINT32_MAX,
                    "raster dimensions exceed 32-bit range");
    std::vector<unsigned char> out(native_header + 4 * image.size(), 0);
    std::memcpy(out.data(), "LPPR", 4);
    put_le<std::uint16_t>(out, 4, 1);
    out[6] = static_cast<unsigned char>(image.plane());
    out[7] = static_cast<unsigned char>(image.kind());
    put_le<std::uint32_t>(out, 8, static_cast<std::uint32_t>(image.width()));
    put_le<std::uint32_t>(out, 12, static_cast<std::uint32_t>(image.height()));
    put_le<double>(out, 16, image.pixel_size());
    auto v = image.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        put_le<float>(out, native_header + 4 * i, static_cast<float>(v[i]));
    return out;
}

RasterImage decode_raster(std::span<const unsigned char> bytes)
{
    if (bytes.size() < native_header)
        throw IoError(offset_message("truncated raster header: " + std::to_string(bytes.size()) +
                                         " bytes, need 32",
                                     bytes.size()));
    if (std::memcmp(bytes.data(), "LPPR", 4) != 0)
        throw IoError(offset_message("bad raster magic, expected \"LPPR\"", 0));
    const auto version = get<std::uint16_t>(bytes, 4);
    if (version != 1)
        throw IoError(offset_message("unsupported raster version " + std::to_string(version), 4));
    const unsigned plane = bytes[6];
    const unsigned kind = bytes[7];
    if (plane > static_cast<unsigned>(PlaneTag::phase_plate))
        throw IoError(offset_message("unknown plane tag " + std::to_string(plane), 6));
    if (kind > static_cast<unsigned>(ValueKind::ctf))
        throw IoError(offset_message("unknown value kind " + std::to_string(kind), 7));
    const std::size_t w = get<std::uint32_t>(bytes, 8);
    const std::size_t h = get<std::uint32_t>(bytes, 12);
    const double px = get<double>(bytes, 16);
    if (w == 0 || h == 0)
        throw IoError(offset_message("raster dimensions must be positive", 8));
    if (!(px > 0.0) || !std::isfinite(px))
        throw IoError(offset_message("raster pixel size must be positive", 16));
    const std::size_t expected = native_header + 4 * w * h;
    if (bytes.size() != expected) {
        std::ostringstream msg;
        msg << "raster payload length mismatch: header declares " << w << "x" << h << " ("
            << expected << " bytes total), file has " << bytes.size() << " bytes";
        throw IoError(offset_message(msg.str(), native_header));
    }
    RasterImage image(w, h, px, static_cast<PlaneTag>(plane), static_cast<ValueKind>(kind));
    auto v = image.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = get<float>(bytes, native_header + 4 * i);
    return image;
}

std::vector<unsigned char> encode_mrc(const RasterImage& image)
{
    detail::require(image.width() > 0 && image.height() > 0, "cannot encode an empty raster");
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    std::vector<unsigned char> out(mrc_header + 4 * w * h, 0);
    const double angstrom = image.pixel_size() * 1e10;
    double lo = INFINITY;
    double hi = -INFINITY;
    double sum = 0.0;
    for (double v : image.values()) {
        const double f = static_cast<float>(v);
        lo = std::min(lo, f);
        hi = std::max(hi, f);
        sum += f;
    }
    const double mean = sum / static_cast<double>(image.size());
    double ss = 0.0;
    for (double v : image.values()) {
        const double f = static_cast<float>(v);
        ss += (f - mean) * (f - mean);
    }
    put_le<std::int32_t>(out, 0, static_cast<std::int32_t>(w));
    put_le<std::int32_t>(out, 4, static_cast<std::int32_t>(h));
    put_le<std::int32_t>(out, 8, 1);
    put_le<std::int32_t>(out, 12, 2);
    put_le<std::int32_t>(out, 28, static_cast<std::int32_t>(w));
    put_le<std::int32_t>(out, 32, static_cast<std::int32_t>(h));
    put_le<std::int32_t>(out, 36, 1);
    put_le<float>(out, 40, static_cast<float>(angstrom * static_cast<double>(w)));
    put_le<float>(out, 44, static_cast<float>(angstrom * static_cast<double>(h)));
    put_le<float>(out, 48, static_cast<float>(angstrom));
    put_le<float>(out, 52, 90.0f);
    put_le<float>(out, 56, 90.0f);
    put_le<float>(out, 60, 90.0f);
    put_le<std::int32_t>(out, 64, 1);
    put_le<std::int32_t>(out, 68, 2);
    put_le<std::int32_t>(out, 72, 3);
    put_le<float>(out, 76, static_cast<float>(lo));
    put_le<float>(out, 80, static_cast<float>(hi));
    put_le<float>(out, 84, static_cast<float>(mean));
    put_le<std::int32_t>(out, 108, 20140);
    std::memcpy(out.data() + 208, "MAP ", 4);
    out[212] = 0x44;
    out[213] = 0x44;
    put_le<float>(out, 216, static_cast<float>(std::sqrt(ss / static_cast<double>(image.size()))));
    put_le<std::int32_t>(out, 220, 1);
    const char label[] = "lppkit";
    std::memcpy(out.data() + 224, label, sizeof(label) - 1);
    std::memset(out.data() + 224 + sizeof(label) - 1, ' ', 80 - (sizeof(label) - 1));
    auto v = image.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        put_le<float>(out, mrc_header + 4 * i, static_cast<float>(v[i]));
    return out;
}

RasterImage decode_mrc(std::span<const unsigned char> bytes)
{
    if (bytes.size() < mrc_header)
        throw IoError(offset_message("truncated MRC header: " + std::to_string(bytes.size()) +
                                         " bytes, need 1024",
                                     bytes.size()));
    if (std::memcmp(bytes.data() + 208, "MAP ", 4) != 0)
        throw IoError(offset_message("missing MRC \"MAP \" identifier", 208));
    // MACHST: 0x44 0x4? little endian, 0x11 0x11 big endian
    const bool little = bytes[212] != 0x11;
    const auto nx = get<std::int32_t>(bytes, 0, little);
    const auto ny = get<std::int32_t>(bytes, 4, little);
    const auto nz = get<std::int32_t>(bytes, 8, little);
    const auto mode = get<std::int32_t>(bytes, 12, little);
    if (mode != 2)
        throw IoError(offset_message("unsupported MRC mode " + std::to_string(mode) +
                                         " (only mode 2, 32-bit float, is supported)",
                                     12));
    if (nx <= 0 || ny <= 0)
        throw IoError(offset_message("MRC dimensions must be positive", 0));
    if (nz != 1)
        throw IoError(offset_message("MRC stacks/volumes are not supported (nz = " +
                                         std::to_string(nz) + ")",
                                     8));
    const auto mx = get<std::int32_t>(bytes, 28, little);
    const double cella_x = get<float>(bytes, 40, little);
    const auto nsymbt = get<std::int32_t>(bytes, 92, little);
    if (nsymbt < 0)
        throw IoError(offset_message("negative MRC extended header size", 92));
    const std::size_t data_offset = mrc_header + static_cast<std::size_t>(nsymbt);
    const std::size_t w = static_cast<std::size_t>(nx);
    const std::size_t h = static_cast<std::size_t>(ny);
    const std::size_t expected = data_offset + 4 * w * h;
    if (bytes.size() < expected) {
        std::ostringstream msg;
        msg << "MRC data truncated: " << nx << "x" << ny << " float32 needs " << expected
            << " bytes, file has " << bytes.size();
        throw IoError(offset_message(msg.str(), data_offset));
    }
    double px = 1.0;
    if (mx > 0 && cella_x > 0.0)
        px = cella_x / mx * 1e-10;
    RasterImage image(w, h, px, PlaneTag::image, ValueKind::intensity);
    auto v = image.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = get<float>(bytes, data_offset + 4 * i, little);
    return image;
}

std::vector<unsigned char> read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string() + " for reading");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read error on " + path.string());
    return bytes;
}

void atomic_write(const fs::path& path, std::span<const unsigned char> bytes)
{
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::random_device rd;
    const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("write error on " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path.string());
    }
}

void atomic_write(const fs::path& path, std::string_view bytes)
{
    atomic_write(path, std::span<const unsigned char>(
                           reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

void write_raster(const RasterImage& image, const fs::path& path)
{
    atomic_write(path, encode_raster(image));
}

RasterImage read_raster(const fs::path& path)
{
    const auto bytes = read_file(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "LPPR", 4) == 0)
        return decode_raster(bytes);
    if (bytes.size() >= mrc_header && std::memcmp(bytes.data() + 208, "MAP ", 4) == 0)
        return decode_mrc(bytes);
    try {
        return decode_raster(bytes);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_mrc(const RasterImage& image, const fs::path& path)
{
    atomic_write(path, encode_mrc(image));
}

RasterImage read_mrc(const fs::path& path)
{
    try {
        return decode_mrc(read_file(path));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

namespace {

std::string format_number(double v)
{
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

}  // namespace

void write_profile_csv(std::span<const double> x, std::span<const double> y,
                       const std::string& x_name, const std::string& y_name, const fs::path& path)
{
    detail::require(x.size() == y.size(), "profile columns differ in length");
    detail::require(!x.empty(), "profile is empty");
    std::string text = x_name + "," + y_name + "\n";
    for (std::size_t i = 0; i < x.size(); ++i)
        text += format_number(x[i]) + "," + format_number(y[i]) + "\n";
    atomic_write(path, text);
}

void write_raster_csv(const RasterImage& image, const fs::path& path)
{
    std::string text;
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            if (x)
                text += ',';
            text += format_number(image(x, y));
        }
        text += '\n';
    }
    atomic_write(path, text);
}

std::vector<std::vector<double>> read_csv_columns(const fs::path& path,
                                                  std::vector<std::string>* header)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string() + " for reading");
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path.string() + ": empty CSV file");
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            names.push_back(cell);
    }
    std::vector<std::vector<double>> cols(names.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c >= cols.size())
                throw IoError(path.string() + ": too many fields on line " + std::to_string(row));
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                cols[c].push_back(v);
            } catch (const std::exception&) {
                throw IoError(path.string() + ": non-numeric field '" + cell + "' on line " +
                              std::to_string(row));
            }
            ++c;
        }
        if (c != cols.size())
            throw IoError(path.string() + ": expected " + std::to_string(cols.size()) +
                          " fields on line " + std::to_string(row));
    }
    if (header)
        *header = names;
    return cols;
}

std::vector<std::uint8_t> to_gray(const RasterImage& image, GrayScaling scaling)
{
    auto v = image.values();
    double lo = 0.0;
    double hi = 0.0;
    if (scaling == GrayScaling::min_max) {
        const auto [a, b] = std::minmax_element(v.begin(), v.end());
        lo = *a;
        hi = *b;
    } else {
        std::vector<double> sorted(v.begin(), v.end());
        std::sort(sorted.begin(), sorted.end());
        auto at = [&](double q) {
            const double pos = q * static_cast<double>(sorted.size() - 1);
            const auto i = static_cast<std::size_t>(pos);
            const double t = pos - static_cast<double>(i);
            return i + 1 < sorted.size() ? sorted[i] * (1 - t) + sorted[i + 1] * t : sorted[i];
        };
        lo = at(0.01);
        hi = at(0.99);
    }
    std::vector<std::uint8_t> gray(v.size(), 128);
    if (!(hi > lo))
        return gray;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
        gray[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
    }
    return gray;
}

void write_pgm(const RasterImage& image, const fs::path& path, GrayScaling scaling)
{
    const auto gray = to_gray(image, scaling);
    std::string text = "P5\n" + std::to_string(image.width()) + " " +
                       std::to_string(image.height()) + "\n255\n";
    text.append(reinterpret_cast<const char*>(gray.data()), gray.size());
    atomic_write(path, text);
}

void write_png(const RasterImage& image, const fs::path& path, GrayScaling scaling)
{
    const auto gray = to_gray(image, scaling);
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, gray.data(), 0, nullptr))
        throw IoError(std::string("PNG encoding failed: ") + png.message);
    std::vector<unsigned char> buffer(size);
    if (!png_image_write_to_memory(&png, buffer.data(), &size, 0, gray.data(), 0, nullptr))
        throw IoError(std::string("PNG encoding failed: ") + png.message);
    buffer.resize(size);
    atomic_write(path, buffer);
}

std::string sha256_hex(std::span<const unsigned char> bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 computation failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i)
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

}  // namespace lpp::io
