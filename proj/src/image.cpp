#include "gsmotion/image.hpp"

#include "gsmotion/errors.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace gsmotion {

namespace {

void check_dims(int width, int height) {
    if (width <= 0 || height <= 0) {
        throw ContractError("image dimensions must be positive, got " + std::to_string(width) +
                            "x" + std::to_string(height));
    }
}

std::size_t pixel_count(int width, int height) {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is) {
    std::string tok;
    char ch = 0;
    while (is.get(ch)) {
        if (ch == '#') {
            std::string ignored;
            std::getline(is, ignored);
            if (!tok.empty()) break;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(ch);
    }
    if (tok.empty()) throw IoError("truncated PGM header");
    return tok;
}

int header_int(std::istream& is, const char* what) {
    const std::string tok = header_token(is);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError(std::string("bad PGM ") + what + ": '" + tok + "'");
    }
}

}  // namespace

GrayImage16::GrayImage16(int width, int height)
    : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(pixel_count(width, height), 0);
}

GrayImage16::GrayImage16(int width, int height, std::vector<std::uint16_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != pixel_count(width, height)) {
        throw ContractError("image data length does not match width*height");
    }
}

ContinuousImage::ContinuousImage(int width, int height)
    : width_(width), height_(height) {
    check_dims(width, height);
    data_.assign(pixel_count(width, height), 0.0);
}

ContinuousImage::ContinuousImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != pixel_count(width, height)) {
        throw ContractError("image data length does not match width*height");
    }
}

std::uint16_t quantize_value(double v) noexcept {
    if (!(v > 0.0)) return 0;  // also catches NaN
    const double scaled = std::round(v * kFullScale);
    if (scaled >= kFullScale) return 65535;
    return static_cast<std::uint16_t>(scaled);
}

GrayImage16 quantize(const ContinuousImage& img) {
    GrayImage16 out(img.width(), img.height());
    const auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = quantize_value(src[i]);
    return out;
}

ContinuousImage normalize(const GrayImage16& img) {
    ContinuousImage out(img.width(), img.height());
    const auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]) / kFullScale;
    return out;
}

void write_pgm(std::ostream& os, const GrayImage16& img) {
    os << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
    std::string buf;
    buf.resize(img.size() * 2);
    const auto px = img.data();
    for (std::size_t i = 0; i < px.size(); ++i) {
        buf[2 * i] = static_cast<char>(px[i] >> 8);
        buf[2 * i + 1] = static_cast<char>(px[i] & 0xff);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("failed writing PGM data");
}

void write_pgm(const std::filesystem::path& path, const GrayImage16& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    write_pgm(os, img);
}

GrayImage16 read_pgm(std::istream& is) {
    if (header_token(is) != "P5") throw IoError("not a binary PGM (expected P5 magic)");
    const int width = header_int(is, "width");
    const int height = header_int(is, "height");
    const int maxval = header_int(is, "maxval");
    if (width <= 0 || height <= 0) throw IoError("PGM dimensions must be positive");
    if (maxval != 65535) {
        throw IoError("only 16-bit PGM (maxval 65535) is supported, got maxval " +
                      std::to_string(maxval));
    }
    // header_token consumed exactly one whitespace byte after maxval.
    std::string buf(pixel_count(width, height) * 2, '\0');
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw IoError("truncated PGM pixel data");
    }
    std::vector<std::uint16_t> data(pixel_count(width, height));
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = static_cast<std::uint16_t>(
            (static_cast<unsigned char>(buf[2 * i]) << 8) | static_cast<unsigned char>(buf[2 * i + 1]));
    }
    return GrayImage16(width, height, std::move(data));
}

GrayImage16 read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    return read_pgm(is);
}

}  // namespace gsmotion
