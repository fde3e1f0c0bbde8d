#pragma once

#include <string>
#include <vector>

#include "hdt/series.hpp"

namespace hdt {

// A multivariate series plus the train/test boundary. Rows containing NaN
// are dropped at ingestion and reported via `rejected_lines`.
struct Dataset {
    Matrix values;  // T x D
    std::string frequency;
    std::vector<std::string> variate_names;
    std::int64_t split = 0;  // first test index
    std::vector<std::int64_t> rejected_lines;

    std::int64_t length() const { return values.rows; }
    std::int64_t variates() const { return values.cols; }
};

struct WindowSpec {
    std::int64_t h = 96;
    std::int64_t tau = 48;
    std::int64_t stride = 1;
    enum class Split { train, test } split = Split::train;

    void validate() const;
};

// Wide CSV: header `timestamp,v0,...`, one row per step; the first column is
// ignored for the math. Unparsable cells and ragged rows raise IngestionError
// naming the line (and column); NaN rows are skipped and recorded.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& dataset, const std::string& path);

// Puts the final `test_tail` steps after the split (default 10*tau, clamped
// so at least one train window remains).
void assign_split(Dataset& dataset, std::int64_t tau, std::int64_t test_tail = -1);

// Scaled windows for one split. Train windows lie wholly before the split;
// test contexts may reach back into train history but test targets start at
// or after the split.
std::vector<SeriesWindow> windows(const Dataset& dataset, const WindowSpec& spec);

// Exact window-count formulas backing `windows`.
std::int64_t train_window_count(std::int64_t split, std::int64_t h, std::int64_t tau, std::int64_t stride);

struct SynthSpec {
    std::int64_t variates = 4;
    std::int64_t length = 2000;
    std::vector<double> periods = {24, 36, 48, 96};  // cycled across variates
    double noise_sigma = 0.1;
    double trend_max = 0.0;  // per-variate slope drawn from [-trend_max, trend_max]
    std::uint64_t seed = 1;
};

// Deterministic sinusoid-plus-trend generator used for desk-scale runs.
Dataset synth_sinusoid(const SynthSpec& spec);

}  // namespace hdt
