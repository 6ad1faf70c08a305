#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace gsmotion {

inline constexpr double kFullScale = 65535.0;

/// 16-bit grayscale raster, row-major, (0,0) at the top-left pixel.
class GrayImage16 {
public:
    GrayImage16() = default;
    GrayImage16(int width, int height);
    GrayImage16(int width, int height, std::vector<std::uint16_t> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::uint16_t at(int x, int y) const { return data_[index(x, y)]; }
    std::uint16_t& at(int x, int y) { return data_[index(x, y)]; }

    std::span<const std::uint16_t> data() const noexcept { return data_; }
    std::span<std::uint16_t> data() noexcept { return data_; }

    bool operator==(const GrayImage16&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint16_t> data_;
};

/// Real-valued raster in normalized intensity units (1.0 = full scale).
/// Values may exceed 1 since kernel sums are not clamped before quantization.
class ContinuousImage {
public:
    ContinuousImage() = default;
    ContinuousImage(int width, int height);
    ContinuousImage(int width, int height, std::vector<double> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    double at(int x, int y) const { return data_[index(x, y)]; }
    double& at(int x, int y) { return data_[index(x, y)]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    const double* row(int y) const noexcept { return data_.data() + index(0, y); }
    double* row(int y) noexcept { return data_.data() + index(0, y); }

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// clamp(round(v * 65535), 0, 65535) with round-half-away-from-zero.
std::uint16_t quantize_value(double v) noexcept;
GrayImage16 quantize(const ContinuousImage& img);

/// Maps 16-bit intensities back to [0, 1].
ContinuousImage normalize(const GrayImage16& img);

// Binary PGM (P5), maxval 65535, big-endian samples.
void write_pgm(std::ostream& os, const GrayImage16& img);
void write_pgm(const std::filesystem::path& path, const GrayImage16& img);
GrayImage16 read_pgm(std::istream& is);
GrayImage16 read_pgm(const std::filesystem::path& path);

}  // namespace gsmotion
