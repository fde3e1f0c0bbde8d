#include "hdt/series.hpp"

#include <algorithm>
#include <cmath>

namespace hdt {

Matrix::Matrix(std::int64_t r, std::int64_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
    if (static_cast<std::int64_t>(values.size()) != r * c) {
        throw DimensionError("matrix: " + std::to_string(values.size()) + " values for " +
                             std::to_string(r) + "x" + std::to_string(c));
    }
}

std::int64_t clamp_kernel(std::int64_t preferred, std::int64_t tau) {
    std::int64_t k = std::min(preferred, tau);
    if (k % 2 == 0) --k;
    return std::max<std::int64_t>(1, k);
}

DownsampledTarget downsample(const Matrix& target, std::int64_t kernel) {
    if (kernel % 2 == 0) throw ParameterError("downsample: kernel must be odd, got " + std::to_string(kernel));
    if (kernel < 1 || kernel > 2 * target.rows - 1) {
        throw ParameterError("downsample: kernel " + std::to_string(kernel) +
                             " outside [1, 2*tau-1] for tau=" + std::to_string(target.rows));
    }
    const std::int64_t tau = target.rows, D = target.cols, half = (kernel - 1) / 2;
    Matrix out(tau, D);
    for (std::int64_t d = 0; d < D; ++d) {
        for (std::int64_t t = 0; t < tau; ++t) {
            double acc = 0.0;
            for (std::int64_t j = t - half; j <= t + half; ++j) {
                const std::int64_t src = std::clamp<std::int64_t>(j, 0, tau - 1);
                acc += target.at(src, d);
            }
            out.at(t, d) = acc / static_cast<double>(kernel);
        }
    }
    return {std::move(out)};
}

SeriesWindow scale_window(SeriesWindow window) {
    const std::int64_t h = window.h(), D = window.variates();
    if (h == 0 || D == 0) throw StateError("scale_window: empty context");
    window.scale.assign(static_cast<std::size_t>(D), 1.0);
    for (std::int64_t d = 0; d < D; ++d) {
        double s = 0.0;
        for (std::int64_t t = 0; t < h; ++t) s += std::abs(window.context.at(t, d));
        window.scale[static_cast<std::size_t>(d)] = s / static_cast<double>(h) + 1.0;
    }
    for (std::int64_t t = 0; t < h; ++t)
        for (std::int64_t d = 0; d < D; ++d)
            window.context.at(t, d) /= window.scale[static_cast<std::size_t>(d)];
    for (std::int64_t t = 0; t < window.tau(); ++t)
        for (std::int64_t d = 0; d < D; ++d)
            window.target.at(t, d) /= window.scale[static_cast<std::size_t>(d)];
    return window;
}

SeriesWindow unscale_window(SeriesWindow window) {
    if (window.scale.empty()) return window;
    const std::int64_t D = window.variates();
    for (std::int64_t t = 0; t < window.h(); ++t)
        for (std::int64_t d = 0; d < D; ++d)
            window.context.at(t, d) *= window.scale[static_cast<std::size_t>(d)];
    for (std::int64_t t = 0; t < window.tau(); ++t)
        for (std::int64_t d = 0; d < D; ++d)
            window.target.at(t, d) *= window.scale[static_cast<std::size_t>(d)];
    window.scale.clear();
    return window;
}

Matrix unscale_matrix(const Matrix& scaled, const std::vector<double>& scale) {
    if (scale.size() != static_cast<std::size_t>(scaled.cols)) {
        throw DimensionError("unscale_matrix: " + std::to_string(scale.size()) + " scales for " +
                             std::to_string(scaled.cols) + " variates");
    }
    Matrix out = scaled;
    for (std::int64_t t = 0; t < out.rows; ++t)
        for (std::int64_t d = 0; d < out.cols; ++d)
            out.at(t, d) *= scale[static_cast<std::size_t>(d)];
    return out;
}

SeriesWindow apply_missing_mask(SeriesWindow window, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) {
        throw ParameterError("missing rate must be in [0,1], got " + std::to_string(rate));
    }
    const std::int64_t h = window.h(), D = window.variates();
    window.mask.assign(static_cast<std::size_t>(h * D), true);
    for (std::int64_t t = 0; t < h; ++t) {
        for (std::int64_t d = 0; d < D; ++d) {
            if (rng.bernoulli(rate)) {
                window.mask[static_cast<std::size_t>(t * D + d)] = false;
                window.context.at(t, d) = 0.0;
            }
        }
    }
    return window;
}

}  // namespace hdt
