#include "gigags/core/image.hpp"

#include "gigags/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace gigags {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1)
        throw Error(ErrorCode::InvalidArgument, "bad image shape");
    data_.assign(std::size_t(width) * std::size_t(height) * std::size_t(channels), fill);
}

ImageBuffer
to_grayscale(const ImageBuffer &rgb) {
    if (rgb.channels() == 1)
        return rgb;
    if (rgb.channels() != 3)
        throw Error(ErrorCode::DimensionMismatch, "grayscale conversion expects 1 or 3 channels");
    ImageBuffer gray(rgb.width(), rgb.height(), 1);
    for (int y = 0; y < rgb.height(); ++y)
        for (int x = 0; x < rgb.width(); ++x)
            gray.at(x, y) = 0.299 * rgb.at(x, y, 0) + 0.587 * rgb.at(x, y, 1) + 0.114 * rgb.at(x, y, 2);
    return gray;
}

ImageBuffer
downscale_box(const ImageBuffer &img, int factor) {
    if (factor < 1)
        throw Error(ErrorCode::InvalidArgument, "downscale factor must be >= 1");
    if (factor == 1)
        return img;
    const int w = img.width() / factor, h = img.height() / factor;
    ImageBuffer out(w, h, img.channels());
    const double norm = 1.0 / double(factor * factor);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels(); ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += img.at(x * factor + dx, y * factor + dy, c);
                out.at(x, y, c) = acc * norm;
            }
    return out;
}

bool
bilinear_taps(int width, int height, double u, double v, BilinearTaps &taps) {
    if (!(u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1))
        return false;
    int x0 = std::min(int(std::floor(u)), width - 2);
    int y0 = std::min(int(std::floor(v)), height - 2);
    if (width < 2 || height < 2)
        return false;
    taps.x0 = x0;
    taps.y0 = y0;
    taps.fx = u - x0;
    taps.fy = v - y0;
    return true;
}

double
bilinear_sample(const ImageBuffer &img, const BilinearTaps &t, int c) {
    const double a = img.at(t.x0, t.y0, c), b = img.at(t.x0 + 1, t.y0, c);
    const double d = img.at(t.x0, t.y0 + 1, c), e = img.at(t.x0 + 1, t.y0 + 1, c);
    return (1 - t.fy) * ((1 - t.fx) * a + t.fx * b) + t.fy * ((1 - t.fx) * d + t.fx * e);
}

void
bilinear_gradient(const ImageBuffer &img, const BilinearTaps &t, int c, double &du, double &dv) {
    const double a = img.at(t.x0, t.y0, c), b = img.at(t.x0 + 1, t.y0, c);
    const double d = img.at(t.x0, t.y0 + 1, c), e = img.at(t.x0 + 1, t.y0 + 1, c);
    du = (1 - t.fy) * (b - a) + t.fy * (e - d);
    dv = ((1 - t.fx) * d + t.fx * e) - ((1 - t.fx) * a + t.fx * b);
}

namespace {

void
skip_ws_and_comments(std::istream &in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

} // namespace

ImageBuffer
read_pnm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string magic;
    in >> magic;
    int channels = 0;
    if (magic == "P6")
        channels = 3;
    else if (magic == "P5")
        channels = 1;
    else
        throw Error(ErrorCode::IoError, path.string() + ": unsupported pixmap type " + magic);
    int w = 0, h = 0, maxval = 0;
    skip_ws_and_comments(in);
    in >> w;
    skip_ws_and_comments(in);
    in >> h;
    skip_ws_and_comments(in);
    in >> maxval;
    in.get();
    if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw Error(ErrorCode::IoError, path.string() + ": bad pixmap header");
    ImageBuffer img(w, h, channels);
    const bool wide = maxval > 255;
    const std::size_t n = img.data().size();
    std::vector<unsigned char> raw(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char *>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(in.gcount()) != raw.size())
        throw Error(ErrorCode::IoError, path.string() + ": truncated pixmap");
    auto dst = img.data();
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned v = wide ? (unsigned(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        dst[i] = double(v) / double(maxval);
    }
    return img;
}

void
write_pnm(const ImageBuffer &img, const std::filesystem::path &path) {
    if (img.channels() != 1 && img.channels() != 3)
        throw Error(ErrorCode::InvalidArgument, "pixmap output needs 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << (img.channels() == 3 ? "P6" : "P5") << '\n'
        << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> raw(img.data().size());
    auto src = img.data();
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(src[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char *>(raw.data()), std::streamsize(raw.size()));
    if (!out)
        throw Error(ErrorCode::IoError, "short write to " + path.string());
}

} // namespace gigags
