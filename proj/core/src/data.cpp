#include "hdt/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace hdt {

void WindowSpec::validate() const {
    if (h <= 0) throw ParameterError("window spec: h must be positive");
    if (tau <= 0 || tau % 2 != 0) throw ParameterError("window spec: tau must be positive and even");
    if (stride < 1) throw ParameterError("window spec: stride must be >= 1");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_cell(const std::string& cell, std::int64_t line_no, std::size_t col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        // from_chars accepts "nan"/"inf"; anything it rejects is malformed
        throw IngestionError("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                             ": cannot parse numeric value '" + cell + "'");
    }
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IngestionError("cannot open '" + path + "'");

    Dataset ds;
    std::string line;
    std::int64_t line_no = 0;
    if (!std::getline(is, line)) throw IngestionError("'" + path + "': empty file");
    ++line_no;
    auto header = split_line(line);
    if (header.size() < 2) throw IngestionError("'" + path + "': header needs a timestamp and at least one variate");
    ds.variate_names.assign(header.begin() + 1, header.end());
    const std::size_t D = ds.variate_names.size();

    std::vector<double> row(D);
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != D + 1) {
            throw IngestionError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(D + 1) + " columns, found " + std::to_string(cells.size()));
        }
        bool has_nan = false;
        for (std::size_t d = 0; d < D; ++d) {
            row[d] = parse_cell(cells[d + 1], line_no, d + 1);
            if (std::isnan(row[d])) has_nan = true;
        }
        if (has_nan) {
            ds.rejected_lines.push_back(line_no);
            continue;
        }
        ds.values.values.insert(ds.values.values.end(), row.begin(), row.end());
        ++ds.values.rows;
    }
    ds.values.cols = static_cast<std::int64_t>(D);
    ds.split = ds.values.rows;
    return ds;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw StateError("cannot open '" + path + "' for writing");
    os << "timestamp";
    for (const auto& n : dataset.variate_names) os << "," << n;
    os << "\n";
    char buf[40];
    for (std::int64_t t = 0; t < dataset.values.rows; ++t) {
        os << t;
        for (std::int64_t d = 0; d < dataset.values.cols; ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", dataset.values.at(t, d));
            os << "," << buf;
        }
        os << "\n";
    }
}

void assign_split(Dataset& dataset, std::int64_t tau, std::int64_t test_tail) {
    if (test_tail < 0) test_tail = 10 * tau;
    dataset.split = std::max<std::int64_t>(1, dataset.length() - test_tail);
}

std::int64_t train_window_count(std::int64_t split, std::int64_t h, std::int64_t tau, std::int64_t stride) {
    const std::int64_t span = split - (h + tau);
    if (span < 0) return 0;
    return span / stride + 1;
}

std::vector<SeriesWindow> windows(const Dataset& dataset, const WindowSpec& spec) {
    spec.validate();
    const std::int64_t T = dataset.length(), D = dataset.variates();
    if (T < spec.h + spec.tau) {
        throw StateError("dataset has " + std::to_string(T) + " rows; need at least " +
                         std::to_string(spec.h + spec.tau));
    }
    std::int64_t first = 0, last = 0;  // inclusive range of window starts
    if (spec.split == WindowSpec::Split::train) {
        last = dataset.split - (spec.h + spec.tau);
    } else {
        first = std::max<std::int64_t>(0, dataset.split - spec.h);
        last = T - (spec.h + spec.tau);
    }
    std::vector<SeriesWindow> out;
    for (std::int64_t start = first; start <= last; start += spec.stride) {
        SeriesWindow w;
        w.start = start;
        w.context = Matrix(spec.h, D);
        w.target = Matrix(spec.tau, D);
        for (std::int64_t t = 0; t < spec.h; ++t)
            for (std::int64_t d = 0; d < D; ++d) w.context.at(t, d) = dataset.values.at(start + t, d);
        for (std::int64_t t = 0; t < spec.tau; ++t)
            for (std::int64_t d = 0; d < D; ++d)
                w.target.at(t, d) = dataset.values.at(start + spec.h + t, d);
        out.push_back(scale_window(std::move(w)));
    }
    return out;
}

Dataset synth_sinusoid(const SynthSpec& spec) {
    if (spec.variates <= 0 || spec.length <= 0) {
        throw ParameterError("synth: variates and length must be positive");
    }
    if (spec.periods.empty()) throw ParameterError("synth: need at least one period");
    Rng rng(spec.seed, 17);
    Dataset ds;
    ds.frequency = "synthetic";
    ds.values = Matrix(spec.length, spec.variates);
    std::vector<double> amp(static_cast<std::size_t>(spec.variates));
    std::vector<double> phase(static_cast<std::size_t>(spec.variates));
    std::vector<double> trend(static_cast<std::size_t>(spec.variates));
    for (std::int64_t d = 0; d < spec.variates; ++d) {
        amp[d] = rng.uniform(0.5, 2.0);
        phase[d] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        trend[d] = spec.trend_max == 0.0 ? 0.0 : rng.uniform(-spec.trend_max, spec.trend_max);
        ds.variate_names.push_back("v" + std::to_string(d));
    }
    for (std::int64_t t = 0; t < spec.length; ++t) {
        for (std::int64_t d = 0; d < spec.variates; ++d) {
            const double p = spec.periods[static_cast<std::size_t>(d) % spec.periods.size()];
            double v = amp[d] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p + phase[d]) +
                       trend[d] * static_cast<double>(t);
            if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
            ds.values.at(t, d) = v;
        }
    }
    ds.split = ds.length();
    return ds;
}

}  // namespace hdt
