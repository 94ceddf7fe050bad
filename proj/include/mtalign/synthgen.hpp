#pragma once

// Synthetic filament images: a bright segment with Gaussian cross-profile on a
// flat background plus seeded Gaussian noise.
//
// Noise generator (fixed; acceptance numbers depend on it):
//   engine   std::mt19937_64 seeded with FilamentSpec::seed
//   uniform  u = (draw >> 11) * 2^-53, mapped to 2u - 1 in [-1, 1)
//   normal   Marsaglia polar method; each accepted pair yields two normals,
//            the first used immediately, the second on the next pixel
//   order    one normal per pixel, row-major (y outer, x inner)
// std::mt19937_64 output is fixed by the C++ standard, unlike the standard
// distributions, which is why the normal transform is spelled out here.

#include <mtalign/error.hpp>
#include <mtalign/image.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace mtalign {

struct FilamentSpec {
    int size = 256;
    double orientation_deg = 0.0;
    double half_length = 80.0;
    double width_sigma = 2.0;
    double amplitude = 1.0;
    double background = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    /// Offset of the segment midpoint from the image center along the
    /// segment direction. 0 keeps the segment centered (and 180-degree
    /// symmetric); a nonzero value puts one end near the center.
    double axial_offset = 0.0;
};

/// Standard normal deviates from mt19937_64 via the Marsaglia polar method.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double next()
    {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        for (;;) {
            const double u = uniform_signed();
            const double v = uniform_signed();
            const double s = u * u + v * v;
            if (s >= 1.0 || s == 0.0)
                continue;
            const double f = std::sqrt(-2.0 * std::log(s) / s);
            spare_ = v * f;
            return u * f;
        }
    }

private:
    double uniform_signed()
    {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return 2.0 * u - 1.0;
    }

    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

inline void validate(const FilamentSpec& spec)
{
    const bool finite = std::isfinite(spec.orientation_deg) && std::isfinite(spec.half_length) &&
                        std::isfinite(spec.width_sigma) && std::isfinite(spec.amplitude) &&
                        std::isfinite(spec.background) && std::isfinite(spec.noise_sigma) &&
                        std::isfinite(spec.axial_offset);
    if (!finite)
        throw DomainError("FilamentSpec: parameters must be finite");
    if (spec.size < 16)
        throw DomainError("FilamentSpec: size must be >= 16");
    if (!(spec.half_length >= 0.0) || !(spec.half_length < spec.size / 2.0))
        throw DomainError("FilamentSpec: half_length must be in [0, size / 2)");
    if (!(spec.width_sigma > 0.0))
        throw DomainError("FilamentSpec: width_sigma must be positive");
    if (!(spec.noise_sigma >= 0.0))
        throw DomainError("FilamentSpec: noise_sigma must be >= 0");
}

[[nodiscard]] inline Image synth_filament(const FilamentSpec& spec)
{
    validate(spec);
    const int n = spec.size;
    const double c = (n - 1) / 2.0;
    const auto [ux, uy] = AffineMatrix::cos_sin_deg(spec.orientation_deg);
    const double mx = c + spec.axial_offset * ux;
    const double my = c + spec.axial_offset * uy;
    const double inv_two_var = 1.0 / (2.0 * spec.width_sigma * spec.width_sigma);

    std::vector<double> px(static_cast<std::size_t>(n) * n);
    GaussianSource noise(spec.seed);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double px_rel = x - mx;
            const double py_rel = y - my;
            const double t = std::clamp(px_rel * ux + py_rel * uy, -spec.half_length, spec.half_length);
            const double dx = px_rel - t * ux;
            const double dy = py_rel - t * uy;
            double v = spec.background + spec.amplitude * std::exp(-(dx * dx + dy * dy) * inv_two_var);
            if (spec.noise_sigma > 0.0)
                v += spec.noise_sigma * noise.next();
            px[static_cast<std::size_t>(y) * n + x] = v;
        }
    }
    return {n, n, std::move(px)};
}

}  // namespace mtalign
