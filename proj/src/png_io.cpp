#include "mvr/png_io.hpp"

#include <csetjmp>
#include <cstring>
#include <string>

#include <png.h>

#include "mvr/common.hpp"

namespace mvr {

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), length);
}

struct MemReader {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos;
};

void consume_bytes(png_structp png, png_bytep out, png_size_t length) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + length > r->size) {
        png_error(png, "unexpected end of PNG stream");
        return;
    }
    std::memcpy(out, r->data + r->pos, length);
    r->pos += length;
}

std::string encode_png(int height, int width, int color_type, const uint8_t* pixels,
                       std::size_t row_bytes) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: failed to allocate encoder");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png: failed to allocate encoder info");
    }
    std::string blob;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png: encode failed");
    }
    png_set_write_fn(png, &blob, append_bytes, nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < height; ++r) {
        png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(r) * row_bytes));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return blob;
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, const ByteGrid& image) {
    if (image.rows() < 1 || image.cols() < 1) throw DataError("png: empty image");
    const std::string blob =
        encode_png(static_cast<int>(image.rows()), static_cast<int>(image.cols()),
                   PNG_COLOR_TYPE_GRAY, image.data(), static_cast<std::size_t>(image.cols()));
    atomic_write_file(path, blob);
}

void write_png_rgb(const std::filesystem::path& path, int height, int width,
                   const std::vector<uint8_t>& rgb) {
    if (height < 1 || width < 1) throw DataError("png: empty image");
    if (rgb.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3) {
        throw DataError("png: rgb buffer size does not match image dimensions");
    }
    const std::string blob = encode_png(height, width, PNG_COLOR_TYPE_RGB, rgb.data(),
                                        static_cast<std::size_t>(width) * 3);
    atomic_write_file(path, blob);
}

ByteGrid read_png_gray(const std::filesystem::path& path) {
    const std::string file = read_file(path);
    if (file.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(file.data()), 0, 8)) {
        throw ParseError("png: " + path.string() + " is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: failed to allocate decoder");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png: failed to allocate decoder info");
    }
    ByteGrid image;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("png: decode failed for " + path.string());
    }
    MemReader reader{reinterpret_cast<const unsigned char*>(file.data()), file.size(), 0};
    png_set_read_fn(png, &reader, consume_bytes);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (depth != 8 || color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("png: " + path.string() + " is not 8-bit grayscale");
    }
    image.resize(static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
    for (png_uint_32 r = 0; r < height; ++r) {
        png_read_row(png, image.data() + static_cast<std::size_t>(r) * width, nullptr);
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

}  // namespace mvr
