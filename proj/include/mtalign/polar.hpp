#pragma once

// Polar resampling: rotation of the source about the sampling center becomes a
// cyclic shift of the angle rows.

#include <mtalign/error.hpp>
#include <mtalign/format.hpp>
#include <mtalign/image.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mtalign {

/// S x R grid, angle-major: row i is angle i * 360 / S degrees, column j is
/// radius (j + 0.5) * max_radius / R.
class PolarImage {
public:
    PolarImage(int angular_samples, int radial_samples, double max_radius,
               std::vector<double> values, std::vector<std::uint8_t> valid)
        : angular_(angular_samples),
          radial_(radial_samples),
          max_radius_(max_radius),
          values_(std::move(values)),
          valid_(std::move(valid))
    {
        if (angular_ < 1 || radial_ < 1)
            throw DomainError("PolarImage: angular and radial sample counts must be >= 1");
        if (!(max_radius_ > 0.0) || !std::isfinite(max_radius_))
            throw DomainError("PolarImage: max_radius must be positive");
        const auto n = static_cast<std::size_t>(angular_) * radial_;
        if (values_.size() != n || valid_.size() != n)
            throw DomainError("PolarImage: value/validity count does not match S x R");
        for (std::size_t i = 0; i < n; ++i) {
            valid_[i] = valid_[i] ? 1 : 0;
            if (valid_[i] && !std::isfinite(values_[i]))
                throw DomainError("PolarImage: non-finite value at a valid sample");
            if (!valid_[i])
                values_[i] = 0.0;
        }
    }

    /// Fully valid grid.
    PolarImage(int angular_samples, int radial_samples, double max_radius, std::vector<double> values)
        : PolarImage(angular_samples, radial_samples, max_radius, std::move(values),
                     std::vector<std::uint8_t>(
                         static_cast<std::size_t>(std::max(angular_samples, 0)) *
                             static_cast<std::size_t>(std::max(radial_samples, 0)),
                         1))
    {
    }

    [[nodiscard]] int angular_samples() const noexcept { return angular_; }
    [[nodiscard]] int radial_samples() const noexcept { return radial_; }
    [[nodiscard]] double max_radius() const noexcept { return max_radius_; }
    [[nodiscard]] double angular_step_deg() const noexcept { return 360.0 / angular_; }
    [[nodiscard]] double radius(int j) const noexcept { return (j + 0.5) * (max_radius_ / radial_); }

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<const std::uint8_t> validity() const noexcept { return valid_; }

    [[nodiscard]] std::span<const double> row(int i) const noexcept
    {
        return std::span<const double>(values_).subspan(static_cast<std::size_t>(i) * radial_, radial_);
    }

    [[nodiscard]] std::span<const std::uint8_t> row_validity(int i) const noexcept
    {
        return std::span<const std::uint8_t>(valid_).subspan(static_cast<std::size_t>(i) * radial_, radial_);
    }

    [[nodiscard]] double value(int i, int j) const
    {
        return values_.at(static_cast<std::size_t>(i) * radial_ + j);
    }

    [[nodiscard]] bool valid(int i, int j) const
    {
        return valid_.at(static_cast<std::size_t>(i) * radial_ + j) != 0;
    }

    [[nodiscard]] bool fully_valid() const noexcept
    {
        return std::all_of(valid_.begin(), valid_.end(), [](auto v) { return v != 0; });
    }

    [[nodiscard]] std::size_t valid_count() const noexcept
    {
        return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
    }

    friend bool operator==(const PolarImage&, const PolarImage&) = default;

private:
    int angular_;
    int radial_;
    double max_radius_;
    std::vector<double> values_;
    std::vector<std::uint8_t> valid_;
};

struct PolarGrid {
    int angular = 720;
    int radial = 200;
};

/// min(width, height) / 2 - 1.
[[nodiscard]] inline double default_max_radius(const Image& img)
{
    return std::min(img.width(), img.height()) / 2.0 - 1.0;
}

[[nodiscard]] inline PolarImage to_polar(const Image& img, double cx, double cy, int angular,
                                         int radial, double max_radius)
{
    if (angular < 1 || radial < 1)
        throw DomainError("to_polar: angular and radial sample counts must be >= 1");
    if (!(max_radius > 0.0) || !std::isfinite(max_radius))
        throw DomainError("to_polar: max_radius must be positive");
    const auto n = static_cast<std::size_t>(angular) * radial;
    std::vector<double> values(n, 0.0);
    std::vector<std::uint8_t> valid(n, 0);
    const double dr = max_radius / radial;
    bool any = false;
    for (int i = 0; i < angular; ++i) {
        const auto [c, s] = AffineMatrix::cos_sin_deg(360.0 * i / angular);
        for (int j = 0; j < radial; ++j) {
            const double r = (j + 0.5) * dr;
            if (const auto v = sample_bilinear(img, cx + r * c, cy + r * s)) {
                const auto k = static_cast<std::size_t>(i) * radial + j;
                values[k] = *v;
                valid[k] = 1;
                any = true;
            }
        }
    }
    if (!any)
        throw DegenerateError("to_polar: no valid sample (check center and max_radius)");
    return {angular, radial, max_radius, std::move(values), std::move(valid)};
}

/// Grid of the given shape about the image center with the default radius.
[[nodiscard]] inline PolarImage to_polar(const Image& img, PolarGrid grid = {})
{
    return to_polar(img, (img.width() - 1) / 2.0, (img.height() - 1) / 2.0, grid.angular,
                    grid.radial, default_max_radius(img));
}

/// Row i of the result is row (i - k) mod S of the input.
[[nodiscard]] inline PolarImage cyclic_shift(const PolarImage& p, long long k)
{
    const long long s = p.angular_samples();
    const auto r = static_cast<std::size_t>(p.radial_samples());
    const long long shift = ((k % s) + s) % s;
    std::vector<double> values(p.values().size());
    std::vector<std::uint8_t> valid(values.size());
    for (long long i = 0; i < s; ++i) {
        const auto src = static_cast<std::size_t>((i - shift + s) % s);
        const auto dst = static_cast<std::size_t>(i);
        std::copy_n(p.values().begin() + static_cast<std::ptrdiff_t>(src * r), r,
                    values.begin() + static_cast<std::ptrdiff_t>(dst * r));
        std::copy_n(p.validity().begin() + static_cast<std::ptrdiff_t>(src * r), r,
                    valid.begin() + static_cast<std::ptrdiff_t>(dst * r));
    }
    return {p.angular_samples(), p.radial_samples(), p.max_radius(), std::move(values), std::move(valid)};
}

/// S lines of R comma-separated values; invalid samples are empty cells.
inline void write_polar_csv(std::ostream& out, const PolarImage& p)
{
    for (int i = 0; i < p.angular_samples(); ++i) {
        for (int j = 0; j < p.radial_samples(); ++j) {
            if (j > 0)
                out << ',';
            if (p.valid(i, j))
                out << format_real(p.value(i, j));
        }
        out << '\n';
    }
}

}  // namespace mtalign
