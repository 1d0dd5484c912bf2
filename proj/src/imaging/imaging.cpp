#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "multidx/error.hpp"
#include "multidx/imaging.hpp"

namespace multidx::imaging {

void GrayImage::validate() const {
    require(pixels.size() == width * height, ErrorCode::InvalidArgument, "image: pixel count does not match size");
}

namespace {

void draw_line(GrayImage& image, long x0, long y0, long x1, long y1) {
    const long dx = std::abs(x1 - x0);
    const long dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1;
    const long sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
        image.at(static_cast<std::size_t>(x0), static_cast<std::size_t>(y0)) = 0.0;
        if (x0 == x1 && y0 == y1) break;
        const long e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

int quantize(double p) { return static_cast<int>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)); }

long cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

GrayImage rasterize_spectrum(std::span<const double> intensities, std::size_t resolution) {
    require(resolution >= 16, ErrorCode::InvalidArgument, "rasterize: resolution must be at least 16");
    require(intensities.size() >= 2, ErrorCode::InvalidArgument, "rasterize: spectrum needs at least two points");
    for (double v : intensities) require(std::isfinite(v), ErrorCode::Data, "rasterize: non-finite intensity");

    const auto [lo, hi] = std::minmax_element(intensities.begin(), intensities.end());
    const double low = *lo;
    const double range = *hi - *lo;
    std::vector<double> normalized(intensities.size(), 0.5);
    if (range > 0.0)
        for (std::size_t i = 0; i < intensities.size(); ++i) normalized[i] = (intensities[i] - low) / range;

    const std::size_t n = normalized.size();
    const auto last_row = static_cast<double>(resolution - 1);
    std::vector<long> rows(resolution);
    for (std::size_t x = 0; x < resolution; ++x) {
        const double position = static_cast<double>(x) * static_cast<double>(n - 1) / last_row;
        const auto i = std::min(static_cast<std::size_t>(position), n - 2);
        const double frac = position - static_cast<double>(i);
        const double v = normalized[i] + frac * (normalized[i + 1] - normalized[i]);
        rows[x] = std::lround((1.0 - std::clamp(v, 0.0, 1.0)) * last_row);
    }

    GrayImage image(resolution, resolution, 1.0);
    image.at(0, static_cast<std::size_t>(rows[0])) = 0.0;
    for (std::size_t x = 1; x < resolution; ++x)
        draw_line(image, static_cast<long>(x - 1), rows[x - 1], static_cast<long>(x), rows[x]);
    return image;
}

std::optional<int> otsu_level(const GrayImage& image) {
    image.validate();
    std::array<double, 256> histogram{};
    for (double p : image.pixels) histogram[static_cast<std::size_t>(quantize(p))] += 1.0;
    const auto total = static_cast<double>(image.pixels.size());
    if (std::count_if(histogram.begin(), histogram.end(), [](double c) { return c > 0.0; }) < 2) return std::nullopt;

    double sum_all = 0.0;
    for (int level = 0; level < 256; ++level) sum_all += level * histogram[static_cast<std::size_t>(level)];

    double weight0 = 0.0, sum0 = 0.0, best_variance = -1.0;
    int best = 0;
    for (int t = 0; t < 255; ++t) {
        weight0 += histogram[static_cast<std::size_t>(t)];
        sum0 += t * histogram[static_cast<std::size_t>(t)];
        const double weight1 = total - weight0;
        if (weight0 == 0.0 || weight1 == 0.0) continue;
        const double mean0 = sum0 / weight0;
        const double mean1 = (sum_all - sum0) / weight1;
        const double variance = weight0 * weight1 * (mean0 - mean1) * (mean0 - mean1);
        if (variance > best_variance) {
            best_variance = variance;
            best = t;
        }
    }
    return best;
}

GrayImage binarize(const GrayImage& image) {
    const auto level = otsu_level(image);
    GrayImage out(image.width, image.height, 1.0);
    if (!level) return out;
    for (std::size_t i = 0; i < image.pixels.size(); ++i) out.pixels[i] = quantize(image.pixels[i]) <= *level ? 0.0 : 1.0;
    return out;
}

std::vector<Point> convex_hull(std::vector<Point> points) {
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (points.size() < 3) return points;
    std::vector<Point> hull(2 * points.size());
    std::size_t k = 0;
    for (const auto& p : points) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    return hull;
}

GrayImage convex_hull_crop(const GrayImage& image) {
    image.validate();
    std::vector<Point> foreground;
    for (std::size_t y = 0; y < image.height; ++y)
        for (std::size_t x = 0; x < image.width; ++x)
            if (image.at(x, y) < 0.5) foreground.push_back({static_cast<long>(x), static_cast<long>(y)});

    const auto hull = convex_hull(std::move(foreground));
    require(hull.size() >= 3, ErrorCode::Data, "no tracing region: fewer than three non-collinear foreground pixels");

    long x0 = hull[0].x, x1 = hull[0].x, y0 = hull[0].y, y1 = hull[0].y;
    for (const auto& p : hull) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    GrayImage out(static_cast<std::size_t>(x1 - x0 + 1), static_cast<std::size_t>(y1 - y0 + 1));
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            out.at(x, y) = image.at(x + static_cast<std::size_t>(x0), y + static_cast<std::size_t>(y0));
    return out;
}

GrayImage resize(const GrayImage& image, std::size_t width, std::size_t height) {
    image.validate();
    require(width >= 1 && height >= 1, ErrorCode::InvalidArgument, "resize: target size must be positive");
    require(image.width >= 1 && image.height >= 1, ErrorCode::InvalidArgument, "resize: empty source image");
    if (width == image.width && height == image.height) return image;

    auto source = [](std::size_t i, std::size_t from, std::size_t to) {
        const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(from) / static_cast<double>(to) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(from - 1));
    };
    GrayImage out(width, height);
    for (std::size_t y = 0; y < height; ++y) {
        const double sy = source(y, image.height, height);
        const auto y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, image.height - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double sx = source(x, image.width, width);
            const auto x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, image.width - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = image.at(x0, y0) * (1.0 - fx) + image.at(x1, y0) * fx;
            const double bottom = image.at(x0, y1) * (1.0 - fx) + image.at(x1, y1) * fx;
            out.at(x, y) = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

GrayImage preprocess_ecg(const GrayImage& image, std::size_t size) {
    return resize(convex_hull_crop(binarize(image)), size, size);
}

}  // namespace multidx::imaging
