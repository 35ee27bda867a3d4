#include "image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace hmsr {

namespace {

enum class FileKind { png, jpeg, other };

FileKind sniff(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open file: " + path);
    unsigned char magic[4] = {0, 0, 0, 0};
    const size_t n = std::fread(magic, 1, sizeof(magic), f);
    std::fclose(f);
    if (n >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G')
        return FileKind::png;
    if (n >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return FileKind::jpeg;
    return FileKind::other;
}

Image from_rgb8(const unsigned char* buf, int h, int w) {
    Image img(h, w);
    const size_t n = static_cast<size_t>(h) * w * 3;
    for (size_t i = 0; i < n; ++i) img.px[i] = static_cast<float>(buf[i]) / 255.f;
    return img;
}

Image load_png_file(const std::string& path) {
    png_image pimg;
    std::memset(&pimg, 0, sizeof(pimg));
    pimg.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pimg, path.c_str()))
        throw std::runtime_error("failed to read PNG: " + path + ": " + pimg.message);
    pimg.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pimg));
    if (!png_image_finish_read(&pimg, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = pimg.message;
        png_image_free(&pimg);
        throw std::runtime_error("failed to decode PNG: " + path + ": " + msg);
    }
    return from_rgb8(buf.data(), static_cast<int>(pimg.height), static_cast<int>(pimg.width));
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Image load_jpeg_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open file: " + path);
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw std::runtime_error("failed to decode JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    std::vector<unsigned char> buf(static_cast<size_t>(h) * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = buf.data() + static_cast<size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return from_rgb8(buf.data(), h, w);
}

}  // namespace

Image load_image(const std::string& path) {
    switch (sniff(path)) {
        case FileKind::png:
            return load_png_file(path);
        case FileKind::jpeg:
            return load_jpeg_file(path);
        default:
            throw std::runtime_error("not a PNG or JPEG file: " + path);
    }
}

bool looks_like_image_file(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return false;
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == "png" || ext == "jpg" || ext == "jpeg";
}

void save_png(const std::string& path, const Image& img) {
    std::vector<unsigned char> buf(static_cast<size_t>(img.h) * img.w * 3);
    for (size_t i = 0; i < buf.size(); ++i) {
        float v = img.px[i];
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.f));
    }
    png_image pimg;
    std::memset(&pimg, 0, sizeof(pimg));
    pimg.version = PNG_IMAGE_VERSION;
    pimg.width = static_cast<png_uint_32>(img.w);
    pimg.height = static_cast<png_uint_32>(img.h);
    pimg.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&pimg, path.c_str(), 0, buf.data(), 0, nullptr))
        throw std::runtime_error("failed to write PNG: " + path + ": " + pimg.message);
}

void save_png_gray(const std::string& path, const std::vector<uint8_t>& data, int h, int w) {
    if (data.size() != static_cast<size_t>(h) * w)
        throw std::invalid_argument("save_png_gray: size mismatch");
    png_image pimg;
    std::memset(&pimg, 0, sizeof(pimg));
    pimg.version = PNG_IMAGE_VERSION;
    pimg.width = static_cast<png_uint_32>(w);
    pimg.height = static_cast<png_uint_32>(h);
    pimg.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&pimg, path.c_str(), 0, data.data(), 0, nullptr))
        throw std::runtime_error("failed to write PNG: " + path + ": " + pimg.message);
}

Tensor<float> image_to_chw(const Image& img) {
    Tensor<float> t(3, img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = img.at(y, x, c);
    return t;
}

Image chw_to_image(const Tensor<float>& t) {
    if (t.c != 3) throw std::invalid_argument("chw_to_image: expected 3 channels");
    Image img(t.h, t.w);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = t.at(c, y, x);
    img.clamp01();
    return img;
}

}  // namespace hmsr
