#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace gigags {

/// Row-major, channel-interleaved image of doubles. Color images live in [0,1];
/// depth and plane-distance buffers are unbounded.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, double fill = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return std::size_t(width_) * std::size_t(height_); }
    bool empty() const noexcept { return data_.empty(); }

    double &at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const ImageBuffer &other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }
    bool same_size(const ImageBuffer &other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    std::size_t index(int x, int y, int c = 0) const noexcept {
        return (std::size_t(y) * std::size_t(width_) + std::size_t(x)) * std::size_t(channels_) +
               std::size_t(c);
    }

    friend bool operator==(const ImageBuffer &, const ImageBuffer &) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Luma 0.299R + 0.587G + 0.114B. A 1-channel input is returned unchanged.
ImageBuffer to_grayscale(const ImageBuffer &rgb);

/// Box filter by an integer factor; trailing pixels that do not fill a block are dropped.
ImageBuffer downscale_box(const ImageBuffer &img, int factor);

/// Bilinear sample of channel c at continuous pixel coordinates (pixel centers at integers).
/// Returns false when any of the four taps falls outside the image.
struct BilinearTaps {
    int x0 = 0, y0 = 0;
    double fx = 0.0, fy = 0.0;
};
bool bilinear_taps(int width, int height, double u, double v, BilinearTaps &taps);
double bilinear_sample(const ImageBuffer &img, const BilinearTaps &taps, int c = 0);
/// d(sample)/du, d(sample)/dv for the same taps.
void bilinear_gradient(const ImageBuffer &img, const BilinearTaps &taps, int c, double &du, double &dv);

// Portable pixmap IO: P6 (RGB) and P5 (gray), 8-bit. Values are clamped to [0,1] on write.
ImageBuffer read_pnm(const std::filesystem::path &path);
void write_pnm(const ImageBuffer &img, const std::filesystem::path &path);

} // namespace gigags
