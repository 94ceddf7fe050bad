#pragma once

// Reference/candidate alignment: disc crop about the image center,
// normalization, polar resampling and the rotation search.

#include <mtalign/correlation.hpp>
#include <mtalign/image.hpp>
#include <mtalign/polar.hpp>

#include <optional>

namespace mtalign {

struct AlignOptions {
    PolarGrid grid;
    std::optional<double> max_radius;   ///< default: min(w, h) / 2 - 1
    std::optional<double> crop_radius;  ///< default: max_radius + 2, covering the bilinear footprint
    bool pruned = false;
};

struct Alignment {
    RotationEstimate estimate;
    Image aligned;  ///< candidate rotated by -estimate.angle_deg
};

[[nodiscard]] inline PolarImage prepare_polar(const Image& img, const AlignOptions& opts = {})
{
    const double cx = (img.width() - 1) / 2.0;
    const double cy = (img.height() - 1) / 2.0;
    const double max_r = opts.max_radius.value_or(default_max_radius(img));
    if (!(max_r > 0.0))
        throw DomainError("prepare_polar: image too small for a polar grid");
    const double crop_r = opts.crop_radius.value_or(max_r + 2.0);
    const DiscWindow win = disc_window(img, cx, cy, crop_r);
    const Image disc = normalize(circular_crop(img, cx, cy, crop_r));
    return to_polar(disc, cx - win.x0, cy - win.y0, opts.grid.angular, opts.grid.radial, max_r);
}

[[nodiscard]] inline RotationEstimate estimate(const PolarImage& ref, const PolarImage& cand, bool pruned)
{
    return pruned ? estimate_rotation_pruned(ref, cand) : estimate_rotation(ref, cand);
}

[[nodiscard]] inline Alignment align(const PolarImage& ref_polar, const Image& cand, const AlignOptions& opts = {})
{
    RotationEstimate est = estimate(ref_polar, prepare_polar(cand, opts), opts.pruned);
    Image aligned = rotate(cand, -est.angle_deg);
    return {std::move(est), std::move(aligned)};
}

[[nodiscard]] inline Alignment align(const Image& ref, const Image& cand, const AlignOptions& opts = {})
{
    return align(prepare_polar(ref, opts), cand, opts);
}

}  // namespace mtalign
