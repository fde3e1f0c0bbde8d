#include <doctest.h>

#include <cmath>

#include "hdt/series.hpp"

using namespace hdt;

namespace {

Matrix column(std::vector<double> v) {
    const auto n = static_cast<std::int64_t>(v.size());
    return Matrix(n, 1, std::move(v));
}

}  // namespace

TEST_CASE("downsample hand cases") {
    SUBCASE("constant column is unchanged for any kernel") {
        Matrix c(6, 1, std::vector<double>(6, 3.25));
        for (std::int64_t k : {1, 3, 5, 7}) {
            auto out = downsample(c, k).values;
            for (double v : out.values) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));
        }
    }
    SUBCASE("[1,2,3,4] with kernel 3 under replication padding") {
        auto out = downsample(column({1, 2, 3, 4}), 3).values;
        CHECK(out.at(0, 0) == doctest::Approx(4.0 / 3.0));
        CHECK(out.at(1, 0) == doctest::Approx(2.0));
        CHECK(out.at(2, 0) == doctest::Approx(3.0));
        CHECK(out.at(3, 0) == doctest::Approx(11.0 / 3.0));
    }
    SUBCASE("kernel 1 is the identity") {
        Matrix m(5, 2);
        Rng rng(3);
        for (auto& v : m.values) v = rng.uniform(-2, 2);
        auto out = downsample(m, 1).values;
        for (std::size_t i = 0; i < m.values.size(); ++i) CHECK(out.values[i] == m.values[i]);
    }
    SUBCASE("even kernel is rejected") {
        CHECK_THROWS_AS(downsample(column({1, 2, 3, 4}), 4), ParameterError);
        CHECK_THROWS_AS(downsample(column({1, 2}), 5), ParameterError);
    }
}

TEST_CASE("downsample is linear") {
    Rng rng(4);
    Matrix x(12, 2), y(12, 2);
    for (auto& v : x.values) v = rng.uniform(-1, 1);
    for (auto& v : y.values) v = rng.uniform(-1, 1);
    const double a = 1.7, b = -0.6;
    Matrix combo(12, 2);
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        combo.values[i] = a * x.values[i] + b * y.values[i];
    auto lhs = downsample(combo, 5).values;
    auto dx = downsample(x, 5).values;
    auto dy = downsample(y, 5).values;
    for (std::size_t i = 0; i < lhs.values.size(); ++i)
        CHECK(lhs.values[i] == doctest::Approx(a * dx.values[i] + b * dy.values[i]).epsilon(1e-12));
}

TEST_CASE("downsample is shift-equivariant away from edges") {
    Rng rng(5);
    const std::int64_t n = 30, k = 5, half = 2, shift = 3;
    std::vector<double> base(n + shift);
    for (auto& v : base) v = rng.uniform(-1, 1);
    Matrix orig(n, 1, std::vector<double>(base.begin(), base.begin() + n));
    Matrix shifted(n, 1, std::vector<double>(base.begin() + shift, base.end()));
    auto d0 = downsample(orig, k).values;
    auto d1 = downsample(shifted, k).values;
    for (std::int64_t t = half; t + shift < n - half; ++t)
        CHECK(d1.at(t, 0) == doctest::Approx(d0.at(t + shift, 0)).epsilon(1e-12));
}

TEST_CASE("downsample never amplifies dispersion on zero-mean input") {
    Rng rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix m(40, 1);
        double mu = 0.0;
        for (auto& v : m.values) {
            v = rng.uniform(-1, 1);
            mu += v;
        }
        mu /= static_cast<double>(m.values.size());
        for (auto& v : m.values) v -= mu;
        auto var = [](const std::vector<double>& v) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            double s = 0.0;
            for (double x : v) s += (x - mean) * (x - mean);
            return s / static_cast<double>(v.size());
        };
        for (std::int64_t k : {3, 5, 9}) {
            CHECK(var(downsample(m, k).values.values) <= var(m.values) + 1e-12);
        }
    }
}

TEST_CASE("scale_window") {
    SUBCASE("all-zero context gives scale 1 and leaves data alone") {
        SeriesWindow w;
        w.context = Matrix(4, 2);
        w.target = Matrix(2, 2, {1, 2, 3, 4});
        auto s = scale_window(w);
        CHECK(s.scale[0] == 1.0);
        CHECK(s.scale[1] == 1.0);
        CHECK(s.target.values == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("context of all 9s scales to 0.9") {
        SeriesWindow w;
        w.context = Matrix(5, 1, std::vector<double>(5, 9.0));
        w.target = Matrix(2, 1, {9, 18});
        auto s = scale_window(w);
        CHECK(s.scale[0] == doctest::Approx(10.0));
        for (std::int64_t t = 0; t < 5; ++t) CHECK(s.context.at(t, 0) == doctest::Approx(0.9));
        CHECK(s.target.at(1, 0) == doctest::Approx(1.8));
    }
    SUBCASE("unscale inverts scaling bit-exactly") {
        Rng rng(7);
        SeriesWindow w;
        w.context = Matrix(8, 3);
        w.target = Matrix(4, 3);
        for (auto& v : w.context.values) v = rng.uniform(-5, 5);
        for (auto& v : w.target.values) v = rng.uniform(-5, 5);
        SeriesWindow orig = w;
        auto round = unscale_window(scale_window(std::move(w)));
        // scale is mean(|.|)+1; division then multiplication by the same
        // double is exact only when the divide is exact, so compare at 1 ulp
        for (std::size_t i = 0; i < orig.context.values.size(); ++i)
            CHECK(round.context.values[i] == doctest::Approx(orig.context.values[i]).epsilon(1e-15));
        for (std::size_t i = 0; i < orig.target.values.size(); ++i)
            CHECK(round.target.values[i] == doctest::Approx(orig.target.values[i]).epsilon(1e-15));
    }
}

TEST_CASE("apply_missing_mask") {
    Rng rng(8);
    SeriesWindow w;
    w.context = Matrix(100, 100);
    w.target = Matrix(2, 100, std::vector<double>(200, 0.5));
    for (auto& v : w.context.values) v = rng.uniform(0.5, 1.5);

    SUBCASE("rate 0 keeps everything") {
        Rng mr(1);
        auto m = apply_missing_mask(w, 0.0, mr);
        CHECK(std::all_of(m.mask.begin(), m.mask.end(), [](bool b) { return b; }));
        CHECK(m.context.values == w.context.values);
    }
    SUBCASE("rate 1 zeroes the whole context, target untouched") {
        Rng mr(2);
        auto m = apply_missing_mask(w, 1.0, mr);
        CHECK(std::none_of(m.mask.begin(), m.mask.end(), [](bool b) { return b; }));
        for (double v : m.context.values) CHECK(v == 0.0);
        CHECK(m.target.values == w.target.values);
    }
    SUBCASE("rate 0.5 over 10000 cells lands within 0.02, survivors bit-identical") {
        Rng mr(3);
        auto m = apply_missing_mask(w, 0.5, mr);
        std::int64_t masked = 0;
        for (std::size_t i = 0; i < m.mask.size(); ++i) {
            if (!m.mask[i]) {
                ++masked;
            } else {
                CHECK(m.context.values[i] == w.context.values[i]);
            }
        }
        const double frac = static_cast<double>(masked) / 10000.0;
        CHECK(frac > 0.48);
        CHECK(frac < 0.52);
    }
    SUBCASE("rate outside [0,1] is rejected") {
        Rng mr(4);
        CHECK_THROWS_AS(apply_missing_mask(w, -0.1, mr), ParameterError);
        CHECK_THROWS_AS(apply_missing_mask(w, 1.1, mr), ParameterError);
    }
}

TEST_CASE("clamp_kernel picks the largest odd width not exceeding tau") {
    CHECK(clamp_kernel(25, 48) == 25);
    CHECK(clamp_kernel(25, 12) == 11);
    CHECK(clamp_kernel(25, 13) == 13);
    CHECK(clamp_kernel(4, 48) == 3);
    CHECK(clamp_kernel(1, 48) == 1);
}
