#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace multidx::imaging {

inline constexpr std::size_t kRamanLength = 900;
inline constexpr std::size_t kEcgSize = 224;

/// Row-major intensities in [0, 1]; 0 is black (ink), 1 is white.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, double fill = 1.0) : width(w), height(h), pixels(w * h, fill) {}

    double& at(std::size_t x, std::size_t y) noexcept { return pixels[y * width + x]; }
    double at(std::size_t x, std::size_t y) const noexcept { return pixels[y * width + x]; }

    void validate() const;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Black 1-pixel polyline on white; column x samples the min-max normalized
/// spectrum at index x*(n-1)/(res-1) by linear interpolation and lands on row
/// round((1-v)*(res-1)). A constant spectrum draws the mid-height line.
GrayImage rasterize_spectrum(std::span<const double> intensities, std::size_t resolution);

/// Otsu threshold level over 256 quantized levels (round(p*255)); levels at or
/// below it are foreground. Empty when the image has a single level.
std::optional<int> otsu_level(const GrayImage& image);

/// Foreground 0, background 1. A single-level image is all background.
GrayImage binarize(const GrayImage& image);

struct Point {
    long x = 0;
    long y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Monotone chain; counter-clockwise without collinear points.
std::vector<Point> convex_hull(std::vector<Point> points);

/// Crops a binary image (foreground < 0.5) to the bounding box of the convex
/// hull of its foreground pixels.
GrayImage convex_hull_crop(const GrayImage& image);

/// Bilinear with pixel-centre alignment; identity when the size is unchanged.
GrayImage resize(const GrayImage& image, std::size_t width, std::size_t height);

/// binarize, crop, resize to size x size.
GrayImage preprocess_ecg(const GrayImage& image, std::size_t size = kEcgSize);

/// Any PNG; colour is reduced by 0.299R + 0.587G + 0.114B after compositing
/// alpha over white.
GrayImage decode_png(std::span<const std::uint8_t> bytes);
GrayImage read_png(const std::filesystem::path& path);

/// 8-bit grayscale PNG (pixels rounded to 1/255).
std::vector<std::uint8_t> encode_png(const GrayImage& image);
void write_png(const GrayImage& image, const std::filesystem::path& path);

}  // namespace multidx::imaging
