#pragma once

#include <cstdint>
#include <vector>

#include "hdt/errors.hpp"
#include "hdt/rng.hpp"

namespace hdt {

// Row-major dense matrix for plain (non-tape) series data.
struct Matrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c, double fill = 0.0)
        : rows(r), cols(c), values(static_cast<std::size_t>(r * c), fill) {}
    Matrix(std::int64_t r, std::int64_t c, std::vector<double> v);

    double& at(std::int64_t r, std::int64_t c) { return values[static_cast<std::size_t>(r * cols + c)]; }
    double at(std::int64_t r, std::int64_t c) const {
        return values[static_cast<std::size_t>(r * cols + c)];
    }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// One training/evaluation instance: context of length h, target of length
// tau, D variates, with the per-variate scale that normalized both and an
// optional observation mask over the context (true = observed).
struct SeriesWindow {
    Matrix context;             // h x D
    Matrix target;              // tau x D
    std::vector<double> scale;  // D, strictly positive
    std::vector<bool> mask;     // empty, or h*D flags (row-major)
    std::int64_t start = 0;     // index of the first context row in the source

    std::int64_t h() const { return context.rows; }
    std::int64_t tau() const { return target.rows; }
    std::int64_t variates() const { return context.cols; }
};

// Moving-average smoothed target; same shape as its source.
struct DownsampledTarget {
    Matrix values;
};

// Moving average with edge-replication padding; output length equals input
// length. Kernel must be odd.
DownsampledTarget downsample(const Matrix& target, std::int64_t kernel);

// Largest odd kernel <= both the preferred width and tau.
std::int64_t clamp_kernel(std::int64_t preferred, std::int64_t tau);

// scale[d] = mean(|context[:,d]|) + 1; divides context and target in place.
SeriesWindow scale_window(SeriesWindow window);
// Exact inverse of scale_window on both context and target.
SeriesWindow unscale_window(SeriesWindow window);
// Multiplies a scaled tau x D forecast back into original units.
Matrix unscale_matrix(const Matrix& scaled, const std::vector<double>& scale);

// Independently zeroes each (already scaled) context entry with probability
// `rate` and records the observation mask. The target is untouched.
SeriesWindow apply_missing_mask(SeriesWindow window, double rate, Rng& rng);

}  // namespace hdt
