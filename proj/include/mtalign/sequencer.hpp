#pragma once

// Frame ordering: pairwise center-crop correlation, probability scaling,
// greedy successor selection and chain scoring of a frame sequence.
//
// Chain model: the two-neighbour conditional P(I_i | I_{i-1}, I_{i-2}) is
// evaluated with the joint term factored into pairwise probabilities,
// P(I_i, I_{i-1} | I_{i-2}) = p[i][i-1] * p[i-1][i-2], which reduces it to
// p[i][i-1]. A sequence's log-probability is then the sum of its step logs.

#include <mtalign/correlation.hpp>
#include <mtalign/error.hpp>
#include <mtalign/format.hpp>
#include <mtalign/image.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mtalign {

/// Square table of reals, row-major.
class SquareTable {
public:
    SquareTable() = default;
    explicit SquareTable(std::size_t n, double fill = 0.0) : n_(n), values_(n * n, fill) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return values_.at(i * n_ + j); }
    double& operator()(std::size_t i, std::size_t j) { return values_.at(i * n_ + j); }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const SquareTable&, const SquareTable&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
};

/// NCC between center crops of registered images; unit diagonal, symmetric.
struct CorrelationMatrix {
    SquareTable values;
};

/// Similarity probabilities in [0, 1]; unit diagonal, symmetric.
class ProbabilityTable {
public:
    explicit ProbabilityTable(SquareTable p) : p_(std::move(p))
    {
        constexpr double tol = 1e-12;
        const std::size_t n = p_.size();
        if (n < 1)
            throw DomainError("ProbabilityTable: empty table");
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double v = p_(i, j);
                if (!(v >= 0.0 && v <= 1.0))
                    throw DomainError("ProbabilityTable: entry (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ") outside [0, 1]");
                if (std::fabs(v - p_(j, i)) > tol)
                    throw DomainError("ProbabilityTable: not symmetric at (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
            }
            if (std::fabs(p_(i, i) - 1.0) > tol)
                throw DomainError("ProbabilityTable: diagonal entry " + std::to_string(i) + " is not 1");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return p_.size(); }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return p_(i, j); }
    [[nodiscard]] const SquareTable& table() const noexcept { return p_; }

private:
    SquareTable p_;
};

struct SequencePlan {
    std::vector<std::size_t> frames;
    std::vector<double> step_probs;
    double log_chain_prob = 0.0;
};

struct MonotonicityViolation {
    std::size_t position = 0;  ///< frame position t; needs p[last][frames[t]] >= p[last][frames[t-1]]
    double expected_ge = 0.0;  ///< p[last][frames[t-1]], the lower bound
    double actual = 0.0;       ///< p[last][frames[t]]
};

/// NCC over the pixels valid in both images (equal dimensions).
[[nodiscard]] inline double masked_ncc(const Image& a, const Image& b)
{
    if (a.width() != b.width() || a.height() != b.height())
        throw DomainError("masked_ncc: image dimensions differ");
    std::vector<double> va, vb;
    va.reserve(a.size());
    vb.reserve(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.valid(i) && b.valid(i)) {
            va.push_back(a.pixels()[i]);
            vb.push_back(b.pixels()[i]);
        }
    }
    if (va.size() < 2)
        throw DegenerateError("fewer than 2 mutually valid pixels");
    return ncc(va, vb);
}

[[nodiscard]] inline CorrelationMatrix correlation_matrix(const std::vector<Image>& images, int crop_size)
{
    const std::size_t n = images.size();
    if (n < 2)
        throw DomainError("correlation_matrix: need at least 2 images");
    std::vector<Image> crops;
    crops.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Image& img = images[i];
        if (crop_size < 1 || img.width() < crop_size || img.height() < crop_size)
            throw DomainError("correlation_matrix: image " + std::to_string(i) + " is smaller than crop " +
                              std::to_string(crop_size));
        try {
            crops.push_back(center_crop(normalize(img), crop_size));
        } catch (const DegenerateError& e) {
            throw DegenerateError("correlation_matrix: image " + std::to_string(i) + ": " + e.what());
        }
    }
    CorrelationMatrix c{SquareTable(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        c.values(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.0;
            try {
                v = masked_ncc(crops[i], crops[j]);
            } catch (const DegenerateError& e) {
                throw DegenerateError("correlation_matrix: degenerate crop pair (" + std::to_string(i) + ", " +
                                      std::to_string(j) + "): " + e.what());
            }
            c.values(i, j) = v;
            c.values(j, i) = v;
        }
    }
    return c;
}

/// p = (ncc + 1) / 2.
[[nodiscard]] inline ProbabilityTable to_probability(const CorrelationMatrix& c)
{
    const std::size_t n = c.values.size();
    SquareTable p(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            p(i, j) = std::clamp((c.values(i, j) + 1.0) / 2.0, 0.0, 1.0);
    return ProbabilityTable(std::move(p));
}

[[nodiscard]] inline double step_log(double p)
{
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

/// Starting at `start`, repeatedly moves to the most probable other frame
/// (smallest index on ties). Frames may recur, never back to back.
[[nodiscard]] inline SequencePlan greedy_sequence(const ProbabilityTable& p, std::size_t start, std::size_t length)
{
    const std::size_t n = p.size();
    if (n < 2)
        throw DomainError("greedy_sequence: need at least 2 images");
    if (start >= n)
        throw DomainError("greedy_sequence: start index " + std::to_string(start) + " out of range");
    if (length < 1)
        throw DomainError("greedy_sequence: length must be >= 1");
    SequencePlan plan;
    plan.frames.push_back(start);
    for (std::size_t t = 1; t < length; ++t) {
        const std::size_t cur = plan.frames.back();
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j)
            if (j != cur && (next == n || p(cur, j) > p(cur, next)))
                next = j;
        plan.frames.push_back(next);
        plan.step_probs.push_back(p(cur, next));
        plan.log_chain_prob += step_log(p(cur, next));
    }
    return plan;
}

/// Sum of log p[frames[t-1]][frames[t]]; -inf when a step has probability 0.
[[nodiscard]] inline double chain_probability(const ProbabilityTable& p, const std::vector<std::size_t>& frames)
{
    if (frames.empty())
        throw DomainError("chain_probability: empty frame list");
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t] >= p.size())
            throw DomainError("chain_probability: frame index " + std::to_string(frames[t]) + " out of range");
        if (t > 0 && frames[t] == frames[t - 1])
            throw DomainError("chain_probability: immediate repeat at position " + std::to_string(t));
    }
    double total = 0.0;
    for (std::size_t t = 1; t < frames.size(); ++t)
        total += step_log(p(frames[t - 1], frames[t]));
    return total;
}

/// For the last frame L, checks p[L][f_{n-2}] >= p[L][f_{n-3}] >= ... >= p[L][f_0]
/// and lists each adjacent pair that breaks the chain.
[[nodiscard]] inline std::vector<MonotonicityViolation> check_monotonicity(const ProbabilityTable& p,
                                                                           const std::vector<std::size_t>& frames)
{
    if (frames.size() < 2)
        throw DomainError("check_monotonicity: need at least 2 frames");
    for (std::size_t f : frames)
        if (f >= p.size())
            throw DomainError("check_monotonicity: frame index " + std::to_string(f) + " out of range");
    const std::size_t last = frames.back();
    std::vector<MonotonicityViolation> out;
    for (std::size_t t = frames.size() - 2; t >= 1; --t) {
        const double nearer = p(last, frames[t]);
        const double farther = p(last, frames[t - 1]);
        if (nearer < farther)
            out.push_back({t, farther, nearer});
    }
    return out;
}

// Square CSV: header row ",0,1,...,n-1", then one row per index "i,v0,...".

inline void write_square_csv(std::ostream& out, const SquareTable& t)
{
    for (std::size_t j = 0; j < t.size(); ++j)
        out << ',' << j;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        out << i;
        for (std::size_t j = 0; j < t.size(); ++j)
            out << ',' << format_real(t(i, j));
        out << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

inline std::string trimmed(std::string s)
{
    const auto ws = " \t\r";
    s.erase(0, s.find_first_not_of(ws));
    const auto end = s.find_last_not_of(ws);
    s.erase(end == std::string::npos ? 0 : end + 1);
    return s;
}

}  // namespace detail

/// Reads the square CSV format above. The leading index column is optional.
[[nodiscard]] inline SquareTable read_square_csv(std::istream& in)
{
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
        if (!detail::trimmed(line).empty())
            lines.push_back(line);
    if (lines.empty())
        throw FormatError("square CSV: empty input");
    const auto header = detail::split_csv_line(lines.front());
    std::size_t n = header.size();
    if (n > 0 && detail::trimmed(header.front()).empty())
        --n;
    if (n < 1)
        throw FormatError("square CSV: header row has no indices");
    if (lines.size() - 1 != n)
        throw FormatError("square CSV: expected " + std::to_string(n) + " data rows, got " +
                          std::to_string(lines.size() - 1));
    SquareTable t(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto cells = detail::split_csv_line(lines[i + 1]);
        if (cells.size() == n + 1) {
            if (detail::trimmed(cells.front()) != std::to_string(i))
                throw FormatError("square CSV: row " + std::to_string(i) + " has label '" + cells.front() + "'");
            cells.erase(cells.begin());
        }
        if (cells.size() != n)
            throw FormatError("square CSV: row " + std::to_string(i) + " has " + std::to_string(cells.size()) +
                              " values, expected " + std::to_string(n));
        for (std::size_t j = 0; j < n; ++j)
            t(i, j) = parse_real(cells[j]);
    }
    return t;
}

}  // namespace mtalign
