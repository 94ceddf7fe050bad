#pragma once

// Grayscale raster with optional validity mask, intensity normalization,
// crops and bilinear geometric warps.
//
// Coordinates: x = column, y = row, origin top-left, pixel centers at integer
// coordinates. Rotations are about ((width - 1) / 2, (height - 1) / 2) and a
// positive angle turns the +x axis toward +y (downward).

#include <mtalign/error.hpp>
#include <mtalign/summation.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mtalign {

class Image {
public:
    Image(int width, int height, double fill = 0.0)
        : width_(width), height_(height)
    {
        check_dims(width, height);
        pixels_.assign(static_cast<std::size_t>(width) * height, fill);
        if (!std::isfinite(fill))
            throw DomainError("Image: pixel values must be finite");
    }

    Image(int width, int height, std::vector<double> pixels,
          std::vector<std::uint8_t> mask = {})
        : width_(width), height_(height), pixels_(std::move(pixels)), mask_(std::move(mask))
    {
        check_dims(width, height);
        const auto n = static_cast<std::size_t>(width) * height;
        if (pixels_.size() != n)
            throw DomainError("Image: pixel count does not match width x height");
        if (!mask_.empty() && mask_.size() != n)
            throw DomainError("Image: mask count does not match width x height");
        for (double v : pixels_)
            if (!std::isfinite(v))
                throw DomainError("Image: pixel values must be finite");
        if (!mask_.empty()) {
            for (auto& m : mask_)
                m = m ? 1 : 0;
            if (std::none_of(mask_.begin(), mask_.end(), [](auto m) { return m != 0; }))
                throw DomainError("Image: mask has no valid pixel");
        }
    }

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return pixels_.size(); }

    [[nodiscard]] std::span<const double> pixels() const noexcept { return pixels_; }
    [[nodiscard]] std::span<const std::uint8_t> mask() const noexcept { return mask_; }
    [[nodiscard]] bool has_mask() const noexcept { return !mask_.empty(); }

    [[nodiscard]] std::size_t index(int x, int y) const noexcept
    {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    [[nodiscard]] bool in_bounds(int x, int y) const noexcept
    {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    [[nodiscard]] double at(int x, int y) const { return pixels_.at(index(x, y)); }

    [[nodiscard]] bool valid(int x, int y) const noexcept
    {
        return mask_.empty() || mask_[index(x, y)] != 0;
    }

    [[nodiscard]] bool valid(std::size_t i) const noexcept { return mask_.empty() || mask_[i] != 0; }

    [[nodiscard]] std::size_t valid_count() const noexcept
    {
        if (mask_.empty())
            return pixels_.size();
        return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static void check_dims(int width, int height)
    {
        if (width < 1 || height < 1)
            throw DomainError("Image: width and height must be >= 1");
    }

    int width_;
    int height_;
    std::vector<double> pixels_;
    std::vector<std::uint8_t> mask_;
};

/// 2D affine transform in homogeneous form; the bottom row is always (0, 0, 1).
class AffineMatrix {
public:
    /// Identity.
    constexpr AffineMatrix() = default;

    constexpr AffineMatrix(double m11, double m12, double m13, double m21, double m22, double m23)
        : m_{m11, m12, m13, m21, m22, m23}
    {
    }

    /// From a full 3x3 row-major matrix; the bottom row must be exactly (0, 0, 1).
    static AffineMatrix from_rows(const std::array<std::array<double, 3>, 3>& rows)
    {
        if (rows[2][0] != 0.0 || rows[2][1] != 0.0 || rows[2][2] != 1.0)
            throw DomainError("AffineMatrix: bottom row must be (0, 0, 1)");
        AffineMatrix a(rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2]);
        for (double v : a.m_)
            if (!std::isfinite(v))
                throw DomainError("AffineMatrix: entries must be finite");
        return a;
    }

    static constexpr AffineMatrix translation(double tx, double ty)
    {
        return {1.0, 0.0, tx, 0.0, 1.0, ty};
    }

    /// Rotation about the origin. Multiples of 90 degrees are exact.
    static AffineMatrix rotation(double angle_deg)
    {
        const auto [c, s] = cos_sin_deg(angle_deg);
        return {c, -s, 0.0, s, c, 0.0};
    }

    static AffineMatrix rotation_about(double angle_deg, double cx, double cy)
    {
        return translation(cx, cy) * rotation(angle_deg) * translation(-cx, -cy);
    }

    /// Entry (row, col), 0-based, including the implicit bottom row.
    [[nodiscard]] constexpr double operator()(int row, int col) const
    {
        if (row == 2)
            return col == 2 ? 1.0 : 0.0;
        return m_[static_cast<std::size_t>(row * 3 + col)];
    }

    [[nodiscard]] constexpr double linear_determinant() const noexcept
    {
        return m_[0] * m_[4] - m_[1] * m_[3];
    }

    [[nodiscard]] AffineMatrix inverse() const
    {
        const double det = linear_determinant();
        if (!(std::fabs(det) > 1e-12))
            throw DomainError("AffineMatrix: singular matrix");
        const double a = m_[4] / det;
        const double b = -m_[1] / det;
        const double d = -m_[3] / det;
        const double e = m_[0] / det;
        return {a, b, -(a * m_[2] + b * m_[5]), d, e, -(d * m_[2] + e * m_[5])};
    }

    [[nodiscard]] constexpr std::pair<double, double> apply(double x, double y) const noexcept
    {
        return {m_[0] * x + m_[1] * y + m_[2], m_[3] * x + m_[4] * y + m_[5]};
    }

    friend constexpr AffineMatrix operator*(const AffineMatrix& l, const AffineMatrix& r)
    {
        return {l.m_[0] * r.m_[0] + l.m_[1] * r.m_[3],
                l.m_[0] * r.m_[1] + l.m_[1] * r.m_[4],
                l.m_[0] * r.m_[2] + l.m_[1] * r.m_[5] + l.m_[2],
                l.m_[3] * r.m_[0] + l.m_[4] * r.m_[3],
                l.m_[3] * r.m_[1] + l.m_[4] * r.m_[4],
                l.m_[3] * r.m_[2] + l.m_[4] * r.m_[5] + l.m_[5]};
    }

    friend constexpr bool operator==(const AffineMatrix&, const AffineMatrix&) = default;

    /// cos and sin of an angle in degrees; exact at multiples of 90.
    static std::pair<double, double> cos_sin_deg(double angle_deg)
    {
        double r = std::fmod(angle_deg, 360.0);
        if (r < 0.0)
            r += 360.0;
        if (r == 0.0)
            return {1.0, 0.0};
        if (r == 90.0)
            return {0.0, 1.0};
        if (r == 180.0)
            return {-1.0, 0.0};
        if (r == 270.0)
            return {0.0, -1.0};
        const double rad = r * std::numbers::pi / 180.0;
        return {std::cos(rad), std::sin(rad)};
    }

private:
    std::array<double, 6> m_{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
};

/// Bilinear sample at (x, y). Returns nullopt when any tap with nonzero weight
/// lies out of bounds or on a masked-out pixel. Coordinates within 1e-9 of an
/// integer are snapped so exact grid positions use a single tap.
[[nodiscard]] inline std::optional<double> sample_bilinear(const Image& img, double x, double y)
{
    constexpr double snap = 1e-9;
    if (!std::isfinite(x) || !std::isfinite(y))
        return std::nullopt;
    if (const double rx = std::round(x); std::fabs(x - rx) < snap)
        x = rx;
    if (const double ry = std::round(y); std::fabs(y - ry) < snap)
        y = ry;
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    if (fx0 < -1.0 || fy0 < -1.0 || fx0 > img.width() || fy0 > img.height())
        return std::nullopt;
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double fx = x - fx0;
    const double fy = y - fy0;

    const std::array<double, 4> weights{(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy),
                                        (1.0 - fx) * fy, fx * fy};
    const std::array<std::pair<int, int>, 4> taps{
        {{x0, y0}, {x0 + 1, y0}, {x0, y0 + 1}, {x0 + 1, y0 + 1}}};
    double value = 0.0;
    for (std::size_t t = 0; t < 4; ++t) {
        if (weights[t] == 0.0)
            continue;
        const auto [tx, ty] = taps[t];
        if (!img.in_bounds(tx, ty) || !img.valid(tx, ty))
            return std::nullopt;
        value += weights[t] * img.at(tx, ty);
    }
    return value;
}

/// Zero mean and unit population standard deviation over valid pixels.
/// Masked-out pixels become 0; the mask is kept.
[[nodiscard]] inline Image normalize(const Image& img)
{
    const auto px = img.pixels();
    CompensatedSum sum;
    std::size_t n = 0;
    double max_abs = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (!img.valid(i))
            continue;
        sum += px[i];
        max_abs = std::max(max_abs, std::fabs(px[i]));
        ++n;
    }
    const double mean = sum.value() / static_cast<double>(n);
    CompensatedSum sq;
    for (std::size_t i = 0; i < px.size(); ++i)
        if (img.valid(i))
            sq += (px[i] - mean) * (px[i] - mean);
    const double sigma = std::sqrt(sq.value() / static_cast<double>(n));
    if (!(sigma > 1e-12 * std::max(1.0, max_abs)))
        throw DegenerateError("normalize: zero variance over valid pixels");

    std::vector<double> out(px.size(), 0.0);
    for (std::size_t i = 0; i < px.size(); ++i)
        if (img.valid(i))
            out[i] = (px[i] - mean) / sigma;
    return {img.width(), img.height(), std::move(out),
            std::vector<std::uint8_t>(img.mask().begin(), img.mask().end())};
}

/// Inclusive pixel window of a disc's bounding square, clipped to the image.
struct DiscWindow {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;

    [[nodiscard]] bool empty() const noexcept { return x1 < x0 || y1 < y0; }
    [[nodiscard]] int width() const noexcept { return x1 - x0 + 1; }
    [[nodiscard]] int height() const noexcept { return y1 - y0 + 1; }
};

[[nodiscard]] inline DiscWindow disc_window(const Image& img, double cx, double cy, double radius)
{
    DiscWindow w;
    const auto clamp_lo = [](double v) { return std::max(0.0, std::ceil(v)); };
    const auto clamp_hi = [](double v, int limit) { return std::min<double>(limit - 1, std::floor(v)); };
    const double x0 = clamp_lo(cx - radius);
    const double y0 = clamp_lo(cy - radius);
    const double x1 = clamp_hi(cx + radius, img.width());
    const double y1 = clamp_hi(cy + radius, img.height());
    if (x1 < x0 || y1 < y0)
        return w;
    w.x0 = static_cast<int>(x0);
    w.y0 = static_cast<int>(y0);
    w.x1 = static_cast<int>(x1);
    w.y1 = static_cast<int>(y1);
    return w;
}

/// Crops to the disc's bounding square and masks pixels whose centers lie
/// outside the disc. Pixel (0, 0) of the result is pixel
/// (disc_window(...).x0, disc_window(...).y0) of the source.
[[nodiscard]] inline Image circular_crop(const Image& img, double cx, double cy, double radius)
{
    if (!(radius > 0.0) || !std::isfinite(radius) || !std::isfinite(cx) || !std::isfinite(cy))
        throw DomainError("circular_crop: radius must be positive and the center finite");
    const DiscWindow win = disc_window(img, cx, cy, radius);
    if (win.empty())
        throw DomainError("circular_crop: disc lies entirely outside the image");

    const auto n = static_cast<std::size_t>(win.width()) * win.height();
    std::vector<double> px(n, 0.0);
    std::vector<std::uint8_t> mask(n, 0);
    bool any = false;
    const double r2 = radius * radius;
    for (int y = win.y0; y <= win.y1; ++y) {
        for (int x = win.x0; x <= win.x1; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            if (dx * dx + dy * dy > r2 || !img.valid(x, y))
                continue;
            const auto i = static_cast<std::size_t>(y - win.y0) * win.width() + (x - win.x0);
            px[i] = img.at(x, y);
            mask[i] = 1;
            any = true;
        }
    }
    if (!any)
        throw DomainError("circular_crop: disc lies entirely outside the image");
    return {win.width(), win.height(), std::move(px), std::move(mask)};
}

/// size x size window whose top-left is (floor((w - size) / 2), floor((h - size) / 2)).
[[nodiscard]] inline Image center_crop(const Image& img, int size)
{
    if (size < 1 || size > std::min(img.width(), img.height()))
        throw DomainError("center_crop: size " + std::to_string(size) + " out of range");
    const int ox = (img.width() - size) / 2;
    const int oy = (img.height() - size) / 2;
    const auto n = static_cast<std::size_t>(size) * size;
    std::vector<double> px(n);
    std::vector<std::uint8_t> mask;
    if (img.has_mask())
        mask.resize(n);
    bool any = !img.has_mask();
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const auto i = static_cast<std::size_t>(y) * size + x;
            px[i] = img.at(ox + x, oy + y);
            if (img.has_mask()) {
                mask[i] = img.valid(ox + x, oy + y) ? 1 : 0;
                any = any || mask[i] != 0;
            }
        }
    }
    if (!any)
        throw DegenerateError("center_crop: window contains no valid pixel");
    return {size, size, std::move(px), std::move(mask)};
}

/// Inverse-mapping warp: each output pixel center is mapped through m^-1 and
/// sampled bilinearly. Unsampleable pixels get `fill` and a cleared mask bit.
[[nodiscard]] inline Image warp_affine(const Image& img, const AffineMatrix& m, double fill)
{
    const AffineMatrix inv = m.inverse();
    if (!std::isfinite(fill))
        throw DomainError("warp_affine: fill must be finite");
    std::vector<double> px(img.size(), fill);
    std::vector<std::uint8_t> mask(img.size(), 0);
    std::size_t valid = 0;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto [sx, sy] = inv.apply(x, y);
            if (const auto v = sample_bilinear(img, sx, sy)) {
                const auto i = img.index(x, y);
                px[i] = *v;
                mask[i] = 1;
                ++valid;
            }
        }
    }
    if (valid == 0)
        throw DegenerateError("warp_affine: transform leaves no valid pixel");
    if (valid == img.size() && !img.has_mask())
        mask.clear();
    return {img.width(), img.height(), std::move(px), std::move(mask)};
}

/// Rotation about the image center; fill 0.
[[nodiscard]] inline Image rotate(const Image& img, double angle_deg)
{
    const double cx = (img.width() - 1) / 2.0;
    const double cy = (img.height() - 1) / 2.0;
    return warp_affine(img, AffineMatrix::rotation_about(angle_deg, cx, cy), 0.0);
}

}  // namespace mtalign
