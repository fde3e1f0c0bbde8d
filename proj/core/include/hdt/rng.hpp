#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "hdt/errors.hpp"

namespace hdt {

// Counter-based 64-bit generator (SplitMix64 over an incrementing counter).
// Every draw is a pure function of (seed, stream, counter), so independent
// streams for batch elements / sample paths can be derived cheaply and
// reproducibly from one root seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : base_(mix(seed ^ mix(stream * 0x9e3779b97f4a7c15ULL + 0x1ULL))), counter_(0) {}

    // Derives an independent child stream, e.g. per sample path or per step.
    Rng stream(std::uint64_t id) const { return Rng(base_, id + 1); }

    std::uint64_t next_u64() { return mix(base_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; draws two uniforms per call and discards the sibling so the
    // stream position is a deterministic function of the call count.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // Index draw from unnormalized non-negative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw ParameterError("categorical: weights must have positive mass");
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    void fill_uniform(std::span<double> out, double lo, double hi) {
        for (double& v : out) v = uniform(lo, hi);
    }

    void fill_normal(std::span<double> out, double mean = 0.0, double sigma = 1.0) {
        for (double& v : out) v = mean + sigma * normal();
    }

    // Draw from Categorical(softmax(logits / temperature)). Temperatures
    // below `greedy_threshold` mean argmax with lowest-index tie-break.
    std::int64_t sample_from_logits(std::span<const double> logits, double temperature,
                                    double greedy_threshold = 1e-6) {
        if (logits.empty()) throw ParameterError("sample_from_logits: empty logits");
        if (!(temperature > 0.0)) throw ParameterError("sample_from_logits: temperature must be positive");
        double mx = logits[0];
        std::size_t arg = 0;
        for (std::size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > mx) {  // strict: ties keep the lowest index
                mx = logits[i];
                arg = i;
            }
        }
        if (temperature < greedy_threshold) return static_cast<std::int64_t>(arg);
        std::vector<double> p(logits.size());
        double z = 0.0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            p[i] = std::exp((logits[i] - mx) / temperature);
            z += p[i];
        }
        double u = uniform() * z;
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) return static_cast<std::int64_t>(i);
        }
        return static_cast<std::int64_t>(p.size() - 1);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t base_;
    std::uint64_t counter_;
};

}  // namespace hdt
