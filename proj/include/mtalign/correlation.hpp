#pragma once

// Normalized cross-correlation, rotation score curves over every cyclic shift
// of a polar grid, and a bound-pruned search returning the same argmax.
//
// Shift convention: scores[k] compares cyclic_shift(ref, k) with cand, i.e.
// ref row i is paired with cand row (i + k) mod S. If cand is ref rotated by
// k * 360 / S degrees, the curve peaks at k and rotating cand by
// -angle_deg aligns it with ref.

#include <mtalign/error.hpp>
#include <mtalign/polar.hpp>
#include <mtalign/summation.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtalign {

/// A later shift replaces the running best only if it scores higher by more
/// than this; rounding-level ties therefore resolve to the smallest shift.
inline constexpr double kScoreTieTolerance = 1e-12;

/// Raw NCC values beyond +-(1 + this) indicate a bug rather than rounding.
inline constexpr double kRawScoreLimit = 1e-6;

struct NccCurve {
    std::vector<double> scores;             ///< NaN where a pruned search abandoned the shift
    std::vector<std::size_t> sample_counts; ///< mutual valid samples per shift; 0 if abandoned

    [[nodiscard]] int angular_samples() const noexcept { return static_cast<int>(scores.size()); }
    [[nodiscard]] bool evaluated(int k) const { return !std::isnan(scores.at(static_cast<std::size_t>(k))); }
};

/// Multiply-accumulate counts of a pruned search.
struct PruningStats {
    std::uint64_t exhaustive_macs = 0;
    std::uint64_t evaluated_macs = 0;
    int shifts_completed = 0;
};

struct RotationEstimate {
    int shift = 0;
    double angle_deg = 0.0;
    double peak_ncc = 0.0;
    NccCurve curve;
    std::optional<PruningStats> pruning;
};

namespace detail {

inline double checked_clamp(double raw)
{
    if (!std::isfinite(raw) || std::fabs(raw) > 1.0 + kRawScoreLimit)
        throw std::logic_error("ncc: raw score " + std::to_string(raw) + " outside [-1, 1]");
    return std::clamp(raw, -1.0, 1.0);
}

/// Sequential argmax with the tie rule above; skips NaN entries.
inline int select_peak(std::span<const double> scores)
{
    int best = -1;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (std::isnan(scores[k]))
            continue;
        if (best < 0 || scores[k] > scores[static_cast<std::size_t>(best)] + kScoreTieTolerance)
            best = static_cast<int>(k);
    }
    return best;
}

inline double row_dot(const double* a, const double* b, std::size_t n) noexcept
{
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        s += a[j] * b[j];
    return s;
}

/// Zero-mean, unit-norm copy of a fully valid grid.
inline std::vector<double> unit_normalized(const PolarImage& p, const char* which)
{
    const auto v = p.values();
    CompensatedSum sum;
    double max_abs = 0.0;
    for (double x : v) {
        sum += x;
        max_abs = std::max(max_abs, std::fabs(x));
    }
    const double mean = sum.value() / static_cast<double>(v.size());
    CompensatedSum sq;
    for (double x : v)
        sq += (x - mean) * (x - mean);
    const double norm = std::sqrt(sq.value());
    const double rms = norm / std::sqrt(static_cast<double>(v.size()));
    if (v.size() < 2 || !(rms > 1e-12 * std::max(1.0, max_abs)))
        throw DegenerateError(std::string("rotation search: zero variance in ") + which +
                              " at shift 0");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = (v[i] - mean) / norm;
    return out;
}

/// Dot product of ref row i with cand row (i + k) mod S, summed row by row in
/// ascending order with compensation across rows.
inline double shifted_dot(const std::vector<double>& a, const std::vector<double>& b, int s, int r, int k)
{
    CompensatedSum acc;
    const auto rr = static_cast<std::size_t>(r);
    for (int i = 0; i < s; ++i) {
        const auto j = static_cast<std::size_t>((i + k) % s);
        acc += row_dot(a.data() + static_cast<std::size_t>(i) * rr, b.data() + j * rr, rr);
    }
    return acc.value();
}

inline void check_same_grid(const PolarImage& ref, const PolarImage& cand)
{
    if (ref.angular_samples() != cand.angular_samples() || ref.radial_samples() != cand.radial_samples())
        throw DomainError("rotation search: grid mismatch (" + std::to_string(ref.angular_samples()) + "x" +
                          std::to_string(ref.radial_samples()) + " vs " +
                          std::to_string(cand.angular_samples()) + "x" +
                          std::to_string(cand.radial_samples()) + ")");
}

/// Per-row sums of a masked grid, after subtracting the grid's valid mean.
struct MaskedRows {
    std::vector<double> values;  // centered, 0 at invalid samples
    std::vector<double> weight;  // 1 valid, 0 invalid
    std::vector<double> row_sum;
    std::vector<double> row_sq;
    std::vector<std::uint8_t> row_full;

    explicit MaskedRows(const PolarImage& p)
    {
        const int s = p.angular_samples();
        const int r = p.radial_samples();
        const auto v = p.values();
        const auto ok = p.validity();
        CompensatedSum sum;
        std::size_t n = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (ok[i]) {
                sum += v[i];
                ++n;
            }
        const double mean = n > 0 ? sum.value() / static_cast<double>(n) : 0.0;
        values.resize(v.size());
        weight.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            weight[i] = ok[i] ? 1.0 : 0.0;
            values[i] = ok[i] ? v[i] - mean : 0.0;
        }
        row_sum.resize(static_cast<std::size_t>(s));
        row_sq.resize(static_cast<std::size_t>(s));
        row_full.resize(static_cast<std::size_t>(s));
        for (int i = 0; i < s; ++i) {
            double a = 0.0;
            double aa = 0.0;
            bool full = true;
            for (int j = 0; j < r; ++j) {
                const auto k = static_cast<std::size_t>(i) * r + j;
                a += values[k];
                aa += values[k] * values[k];
                full = full && ok[k];
            }
            row_sum[static_cast<std::size_t>(i)] = a;
            row_sq[static_cast<std::size_t>(i)] = aa;
            row_full[static_cast<std::size_t>(i)] = full ? 1 : 0;
        }
    }
};

/// NCC at shift k over the samples valid in both grids, means and variances
/// taken over that overlap.
inline std::pair<double, std::size_t> masked_shift_score(const MaskedRows& a, const MaskedRows& b, int s,
                                                         int r, int k)
{
    CompensatedSum sa, sb, saa, sbb, sab;
    std::size_t n = 0;
    const auto rr = static_cast<std::size_t>(r);
    for (int i = 0; i < s; ++i) {
        const auto ia = static_cast<std::size_t>(i);
        const auto ib = static_cast<std::size_t>((i + k) % s);
        const double* av = a.values.data() + ia * rr;
        const double* bv = b.values.data() + ib * rr;
        if (a.row_full[ia] && b.row_full[ib]) {
            sa += a.row_sum[ia];
            saa += a.row_sq[ia];
            sb += b.row_sum[ib];
            sbb += b.row_sq[ib];
            sab += row_dot(av, bv, rr);
            n += rr;
            continue;
        }
        const double* aw = a.weight.data() + ia * rr;
        const double* bw = b.weight.data() + ib * rr;
        double ra = 0.0, rb = 0.0, raa = 0.0, rbb = 0.0, rab = 0.0, rn = 0.0;
        for (std::size_t j = 0; j < rr; ++j) {
            ra += av[j] * bw[j];
            raa += av[j] * av[j] * bw[j];
            rb += bv[j] * aw[j];
            rbb += bv[j] * bv[j] * aw[j];
            rab += av[j] * bv[j];
            rn += aw[j] * bw[j];
        }
        sa += ra;
        saa += raa;
        sb += rb;
        sbb += rbb;
        sab += rab;
        n += static_cast<std::size_t>(rn);
    }
    const auto fail = [k](const std::string& why) {
        return DegenerateError("rotation search: degenerate overlap at shift " + std::to_string(k) + ": " + why);
    };
    if (n < 2)
        throw fail("fewer than 2 mutually valid samples");
    const double dn = static_cast<double>(n);
    const double var_a = saa.value() - sa.value() * sa.value() / dn;
    const double var_b = sbb.value() - sb.value() * sb.value() / dn;
    if (!(var_a > 1e-13 * saa.value()) || !(var_b > 1e-13 * sbb.value()))
        throw fail("zero variance");
    const double cov = sab.value() - sa.value() * sb.value() / dn;
    return {checked_clamp(cov / std::sqrt(var_a * var_b)), n};
}

}  // namespace detail

/// Pearson NCC of two equal-length sample vectors.
[[nodiscard]] inline double ncc(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw DomainError("ncc: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
    if (a.size() < 2)
        throw DomainError("ncc: need at least 2 samples");
    const auto mean = [](std::span<const double> v) {
        CompensatedSum s;
        for (double x : v)
            s += x;
        return s.value() / static_cast<double>(v.size());
    };
    const double ma = mean(a);
    const double mb = mean(b);
    CompensatedSum sab, saa, sbb, raw_a, raw_b;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
        raw_a += a[i] * a[i];
        raw_b += b[i] * b[i];
    }
    // Relative threshold: sigma below 1e-12 of the RMS is rounding noise on a constant.
    if (!(saa.value() > 1e-24 * raw_a.value()) || !(sbb.value() > 1e-24 * raw_b.value()))
        throw DegenerateError("ncc: zero variance input");
    return detail::checked_clamp(sab.value() / std::sqrt(saa.value() * sbb.value()));
}

/// NCC for every cyclic shift k in [0, S).
[[nodiscard]] inline NccCurve rotation_score_curve(const PolarImage& ref, const PolarImage& cand)
{
    detail::check_same_grid(ref, cand);
    const int s = ref.angular_samples();
    const int r = ref.radial_samples();
    NccCurve curve;
    curve.scores.resize(static_cast<std::size_t>(s));
    curve.sample_counts.resize(static_cast<std::size_t>(s));

    if (ref.fully_valid() && cand.fully_valid()) {
        // Overlap is the whole grid at every shift, so one global
        // normalization is exact and each score is a plain dot product.
        const auto a = detail::unit_normalized(ref, "reference");
        const auto b = detail::unit_normalized(cand, "candidate");
        for (int k = 0; k < s; ++k) {
            curve.scores[static_cast<std::size_t>(k)] = detail::checked_clamp(detail::shifted_dot(a, b, s, r, k));
            curve.sample_counts[static_cast<std::size_t>(k)] = ref.values().size();
        }
        return curve;
    }

    const detail::MaskedRows a(ref);
    const detail::MaskedRows b(cand);
    for (int k = 0; k < s; ++k) {
        const auto [score, n] = detail::masked_shift_score(a, b, s, r, k);
        curve.scores[static_cast<std::size_t>(k)] = score;
        curve.sample_counts[static_cast<std::size_t>(k)] = n;
    }
    return curve;
}

[[nodiscard]] inline RotationEstimate estimate_from_curve(NccCurve curve)
{
    const int best = detail::select_peak(curve.scores);
    if (best < 0)
        throw DegenerateError("rotation search: no evaluated shift");
    RotationEstimate est;
    est.shift = best;
    est.angle_deg = best * (360.0 / curve.angular_samples());
    est.peak_ncc = curve.scores[static_cast<std::size_t>(best)];
    est.curve = std::move(curve);
    return est;
}

/// Shift maximizing the score curve; rounding-level ties go to the smaller shift.
[[nodiscard]] inline RotationEstimate estimate_rotation(const PolarImage& ref, const PolarImage& cand)
{
    return estimate_from_curve(rotation_score_curve(ref, cand));
}

/// Same result as estimate_rotation on fully valid grids, abandoning a shift
/// once its partial dot product plus the Cauchy-Schwarz bound on the remaining
/// rows cannot beat the best completed shift. Rows are consumed in ascending
/// ref order and the bound is checked after each row.
[[nodiscard]] inline RotationEstimate estimate_rotation_pruned(const PolarImage& ref, const PolarImage& cand)
{
    detail::check_same_grid(ref, cand);
    if (!ref.fully_valid() || !cand.fully_valid())
        throw DomainError("estimate_rotation_pruned: grids must have no invalid samples");
    // Guards the bound test against rounding in the partial sum and energies.
    constexpr double kBoundGuard = 1e-13;

    const int s = ref.angular_samples();
    const int r = ref.radial_samples();
    const auto rr = static_cast<std::size_t>(r);
    const auto ss = static_cast<std::size_t>(s);
    const auto a = detail::unit_normalized(ref, "reference");
    const auto b = detail::unit_normalized(cand, "candidate");

    std::vector<double> energy_a(ss), energy_b(ss);
    for (std::size_t i = 0; i < ss; ++i) {
        energy_a[i] = detail::row_dot(a.data() + i * rr, a.data() + i * rr, rr);
        energy_b[i] = detail::row_dot(b.data() + i * rr, b.data() + i * rr, rr);
    }
    // remaining_a[t]: energy of ref rows t..S-1.
    std::vector<double> remaining_a(ss + 1, 0.0);
    {
        CompensatedSum acc;
        for (std::size_t t = ss; t-- > 0;) {
            acc += energy_a[t];
            remaining_a[t] = acc.value();
        }
    }

    NccCurve curve;
    curve.scores.assign(ss, std::numeric_limits<double>::quiet_NaN());
    curve.sample_counts.assign(ss, 0);
    PruningStats stats;
    stats.exhaustive_macs = static_cast<std::uint64_t>(ss) * ss * rr;

    std::vector<double> remaining_b(ss + 1, 0.0);
    double best = 0.0;
    bool have_best = false;
    for (int k = 0; k < s; ++k) {
        {
            CompensatedSum acc;
            for (std::size_t t = ss; t-- > 0;) {
                acc += energy_b[(t + static_cast<std::size_t>(k)) % ss];
                remaining_b[t] = acc.value();
            }
        }
        CompensatedSum dot;
        bool abandoned = false;
        for (int i = 0; i < s; ++i) {
            const auto j = static_cast<std::size_t>((i + k) % s);
            dot += detail::row_dot(a.data() + static_cast<std::size_t>(i) * rr, b.data() + j * rr, rr);
            stats.evaluated_macs += rr;
            const auto next = static_cast<std::size_t>(i) + 1;
            if (have_best && next < ss) {
                const double rest = std::sqrt(std::max(0.0, remaining_a[next]) * std::max(0.0, remaining_b[next]));
                if (dot.value() + rest <= best + kScoreTieTolerance - kBoundGuard) {
                    abandoned = true;
                    break;
                }
            }
        }
        if (abandoned)
            continue;
        const double score = detail::checked_clamp(dot.value());
        curve.scores[static_cast<std::size_t>(k)] = score;
        curve.sample_counts[static_cast<std::size_t>(k)] = ss * rr;
        ++stats.shifts_completed;
        if (!have_best || score > best + kScoreTieTolerance) {
            best = score;
            have_best = true;
        }
    }

    RotationEstimate est = estimate_from_curve(std::move(curve));
    est.pruning = stats;
    return est;
}

/// Two-column CSV "shift,score"; abandoned shifts have an empty score cell.
inline void write_curve_csv(std::ostream& out, const NccCurve& curve)
{
    out << "shift,score\n";
    for (std::size_t k = 0; k < curve.scores.size(); ++k) {
        out << k << ',';
        if (!std::isnan(curve.scores[k]))
            out << format_real(curve.scores[k]);
        out << '\n';
    }
}

}  // namespace mtalign
