#pragma once

#include <span>

#include "hdt/series.hpp"
#include "hdt/tensor.hpp"

namespace hdt {

// [B, D, L] channels-first batch from L x D matrices (convolution layout).
inline Tensor pack_channels_first(std::span<const Matrix* const> mats) {
    if (mats.empty()) throw StateError("pack_channels_first: empty batch");
    const std::int64_t L = mats[0]->rows, D = mats[0]->cols;
    const std::int64_t B = static_cast<std::int64_t>(mats.size());
    std::vector<double> data(static_cast<std::size_t>(B * D * L));
    for (std::int64_t b = 0; b < B; ++b) {
        if (mats[b]->rows != L || mats[b]->cols != D)
            throw DimensionError("pack_channels_first: ragged batch");
        for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t t = 0; t < L; ++t)
                data[(b * D + d) * L + t] = mats[b]->at(t, d);
    }
    return Tensor({B, D, L}, std::move(data));
}

// [B, L, D] time-major batch (transformer layout).
inline Tensor pack_time_major(std::span<const Matrix* const> mats) {
    if (mats.empty()) throw StateError("pack_time_major: empty batch");
    const std::int64_t L = mats[0]->rows, D = mats[0]->cols;
    const std::int64_t B = static_cast<std::int64_t>(mats.size());
    std::vector<double> data(static_cast<std::size_t>(B * L * D));
    for (std::int64_t b = 0; b < B; ++b) {
        if (mats[b]->rows != L || mats[b]->cols != D)
            throw DimensionError("pack_time_major: ragged batch");
        std::copy(mats[b]->values.begin(), mats[b]->values.end(), data.begin() + b * L * D);
    }
    return Tensor({B, L, D}, std::move(data));
}

// tau x D matrix from one [B, D, L] batch slot.
inline Matrix unpack_channels_first(const Tensor& batch, std::int64_t b) {
    const std::int64_t D = batch.dim(1), L = batch.dim(2);
    Matrix out(L, D);
    for (std::int64_t d = 0; d < D; ++d)
        for (std::int64_t t = 0; t < L; ++t) out.at(t, d) = batch.at({b, d, t});
    return out;
}

}  // namespace hdt
