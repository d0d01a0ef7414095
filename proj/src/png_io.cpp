#include "mg/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace mg {

namespace {

std::vector<std::uint8_t> read_png(const std::string& path, int& width, int& height,
                                   int& channels) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw IoError("load: cannot read '" + path + "': " + image.message);
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    channels = gray ? 1 : 3;
    width = static_cast<int>(image.width);
    height = static_cast<int>(image.height);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(width) * height * channels);
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IoError("load: decode failed for '" + path + "': " + image.message);
    }
    return buf;
}

}  // namespace

ImageTensor load_image(const std::string& path) {
    int w = 0, h = 0, ch = 0;
    const auto buf = read_png(path, w, h, ch);
    ImageTensor img(3, h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            for (int c = 0; c < 3; ++c) {
                const std::uint8_t v = buf[(static_cast<std::size_t>(i) * w + j) * ch +
                                           (ch == 3 ? c : 0)];
                img.at(c, i, j) = static_cast<float>(v) / 255.0f;
            }
        }
    }
    return img;
}

void save_image(const ImageTensor& img, const std::string& path) {
    if (img.channels() != 3) throw ParamError("save_image: expected 3 channels");
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(img.height()) * img.width() * 3);
    for (int i = 0; i < img.height(); ++i)
        for (int j = 0; j < img.width(); ++j)
            for (int c = 0; c < 3; ++c)
                buf[(static_cast<std::size_t>(i) * img.width() + j) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(
                        std::clamp(img.at(c, i, j), 0.0f, 1.0f) * 255.0f));
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
        throw IoError("save_image: cannot write '" + path + "': " + image.message);
}

BinaryMask load_mask(const std::string& path, int threshold) {
    int w = 0, h = 0, ch = 0;
    const auto buf = read_png(path, w, h, ch);
    BinaryMask m(h, w);
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            int lum = 0;
            for (int c = 0; c < ch; ++c)
                lum += buf[(static_cast<std::size_t>(i) * w + j) * ch + c];
            lum /= ch;
            m.at(i, j) = lum >= threshold ? 1.0f : 0.0f;
        }
    }
    return m;
}

void save_mask(const BinaryMask& m, const std::string& path) {
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(m.height()) * m.width());
    for (int i = 0; i < m.height(); ++i)
        for (int j = 0; j < m.width(); ++j)
            buf[static_cast<std::size_t>(i) * m.width() + j] = m.at(i, j) != 0.0f ? 255 : 0;
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(m.width());
    image.height = static_cast<png_uint_32>(m.height());
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
        throw IoError("save_mask: cannot write '" + path + "': " + image.message);
}

}  // namespace mg
