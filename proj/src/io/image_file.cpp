#include "corrfabr/io/image_file.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "corrfabr/core/error.hpp"

namespace corrfabr::io {

namespace {

int next_pnm_token(std::istream& is) {
    // Skips whitespace and '#' comments.
    for (;;) {
        int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int value = -1;
    is >> value;
    if (!is || value < 0) throw InputError("malformed PNM header");
    return value;
}

core::Tensor read_pnm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path.string());
    char p = 0, kind = 0;
    is >> p >> kind;
    if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6')) {
        throw InputError("unsupported PNM type in " + path.string());
    }
    const bool color = kind == '3' || kind == '6';
    const bool binary = kind == '5' || kind == '6';
    const std::size_t w = static_cast<std::size_t>(next_pnm_token(is));
    const std::size_t h = static_cast<std::size_t>(next_pnm_token(is));
    const int maxval = next_pnm_token(is);
    if (w == 0 || h == 0 || maxval <= 0 || maxval > 65535) {
        throw InputError("bad PNM dimensions in " + path.string());
    }

    const std::size_t channels = color ? 3 : 1;
    const std::size_t n = h * w * channels;
    std::vector<double> data(n);
    const double scale = 255.0 / static_cast<double>(maxval);
    if (binary) {
        is.get();  // single whitespace after maxval
        const std::size_t bytes_per = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(n * bytes_per);
        is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!is) throw InputError("truncated PNM payload in " + path.string());
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned value = bytes_per == 1
                                       ? raw[i]
                                       : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
            data[i] = static_cast<double>(value) * scale;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            data[i] = static_cast<double>(next_pnm_token(is)) * scale;
        }
    }
    if (color) return core::Tensor({h, w, 3}, std::move(data));
    return core::Tensor({h, w}, std::move(data));
}

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* file = nullptr;

    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (file) std::fclose(file);
    }
};

core::Tensor read_png(const std::filesystem::path& path) {
    PngReadCloser ctx;
    ctx.file = std::fopen(path.c_str(), "rb");
    if (!ctx.file) throw IoError("cannot open image: " + path.string());

    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) throw IoError("libpng init failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) throw IoError("libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) {
        throw InputError("malformed PNG: " + path.string());
    }

    png_init_io(ctx.png, ctx.file);
    png_read_info(ctx.png, ctx.info);

    png_set_expand(ctx.png);
    png_set_strip_16(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    const std::size_t h = png_get_image_height(ctx.png, ctx.info);
    const std::size_t w = png_get_image_width(ctx.png, ctx.info);
    const int color_type = png_get_color_type(ctx.png, ctx.info);
    std::size_t channels = png_get_channels(ctx.png, ctx.info);
    if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
        throw InputError("unsupported PNG color type in " + path.string());
    }
    if (channels != 1 && channels != 3) {
        throw InputError("unsupported PNG channel count in " + path.string());
    }

    std::vector<unsigned char> raw(h * w * channels);
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = raw.data() + y * w * channels;
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);

    std::vector<double> data(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) data[i] = static_cast<double>(raw[i]);
    if (channels == 3) return core::Tensor({h, w, 3}, std::move(data));
    return core::Tensor({h, w}, std::move(data));
}

}  // namespace

core::Tensor read_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open image: " + path.string());
    unsigned char sig[8] = {};
    probe.read(reinterpret_cast<char*>(sig), 8);
    probe.close();
    if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    if (sig[0] == 'P') return read_pnm(path);
    throw InputError("unrecognized image format (expected PNG or PNM): " + path.string());
}

void write_pnm(const core::Tensor& image, const std::filesystem::path& path) {
    const bool color = image.ndim() == 3;
    if (image.ndim() != 2 && !(color && image.extent(2) == 3)) {
        throw InputError("write_pnm expects [H,W] or [H,W,3]");
    }
    const std::size_t h = image.extent(0), w = image.extent(1);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write image: " + path.string());
    os << (color ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(image.numel());
    for (std::size_t i = 0; i < image.numel(); ++i) {
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.at(i), 0.0, 255.0)));
    }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!os) throw IoError("image write failed: " + path.string());
}

}  // namespace corrfabr::io
