#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "multidx/error.hpp"
#include "multidx/imaging.hpp"

namespace multidx::imaging {

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
        fail(ErrorCode::Format, std::string("malformed png: ") + png.message);
    png.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&png);
        fail(ErrorCode::Format, std::string("malformed png: ") + png.message);
    }

    GrayImage image(png.width, png.height);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        const std::uint8_t* p = buffer.data() + 4 * i;
        double value = p[0] == p[1] && p[1] == p[2] ? p[0] / 255.0
                                                    : (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
        if (p[3] != 255) {
            const double alpha = p[3] / 255.0;
            value = value * alpha + (1.0 - alpha);
        }
        image.pixels[i] = std::clamp(value, 0.0, 1.0);
    }
    return image;
}

GrayImage read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
    image.validate();
    require(image.width > 0 && image.height > 0, ErrorCode::InvalidArgument, "png: empty image");
    std::vector<std::uint8_t> gray(image.pixels.size());
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));

    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, gray.data(), 0, nullptr))
        fail(ErrorCode::Internal, std::string("png encode: ") + png.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, gray.data(), 0, nullptr))
        fail(ErrorCode::Internal, std::string("png encode: ") + png.message);
    out.resize(size);
    return out;
}

void write_png(const GrayImage& image, const std::filesystem::path& path) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace multidx::imaging
