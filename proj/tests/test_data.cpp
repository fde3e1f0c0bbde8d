#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "hdt/data.hpp"

using namespace hdt;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content = "")
        : path("/tmp/hdt_test_" + name) {
        if (!content.empty()) {
            std::ofstream os(path, std::ios::trunc);
            os << content;
        }
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv parses a wide file") {
    TempFile f("basic.csv",
               "timestamp,a,b\n"
               "2020-01-01,1.5,2\n"
               "2020-01-02,-3,4.25\n"
               "2020-01-03,5,6\n");
    Dataset ds = load_csv(f.path);
    CHECK(ds.length() == 3);
    CHECK(ds.variates() == 2);
    CHECK(ds.variate_names == std::vector<std::string>{"a", "b"});
    CHECK(ds.values.at(0, 0) == 1.5);
    CHECK(ds.values.at(1, 1) == 4.25);
    CHECK(ds.values.at(2, 0) == 5.0);
}

TEST_CASE("load_csv names the offending line") {
    TempFile f("bad.csv",
               "timestamp,a\n"
               "0,1\n0,2\n0,3\n0,4\n0,5\n"
               "0,oops\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("line 7"), IngestionError);

    TempFile g("ragged.csv", "timestamp,a,b\n0,1,2\n1,3\n");
    CHECK_THROWS_WITH_AS(load_csv(g.path), doctest::Contains("line 3"), IngestionError);
}

TEST_CASE("load_csv rejects NaN rows with a report") {
    TempFile f("nanrow.csv",
               "timestamp,a,b\n"
               "0,1,2\n"
               "1,nan,3\n"
               "2,4,5\n");
    Dataset ds = load_csv(f.path);
    CHECK(ds.length() == 2);
    REQUIRE(ds.rejected_lines.size() == 1);
    CHECK(ds.rejected_lines[0] == 3);
    for (double v : ds.values.values) CHECK(std::isfinite(v));
}

TEST_CASE("csv round-trip preserves full float precision") {
    SynthSpec spec;
    spec.variates = 3;
    spec.length = 50;
    spec.noise_sigma = 0.37;
    spec.seed = 9;
    Dataset ds = synth_sinusoid(spec);
    TempFile f("rt.csv");
    write_csv(ds, f.path);
    Dataset back = load_csv(f.path);
    REQUIRE(back.length() == ds.length());
    REQUIRE(back.variates() == ds.variates());
    for (std::size_t i = 0; i < ds.values.values.size(); ++i)
        CHECK(back.values.values[i] == ds.values.values[i]);
}

TEST_CASE("window streams") {
    SynthSpec spec;
    spec.variates = 2;
    spec.length = 200;
    spec.seed = 11;
    Dataset ds = synth_sinusoid(spec);
    ds.split = 150;

    WindowSpec train{96, 48, 1, WindowSpec::Split::train};
    auto tw = windows(ds, train);
    CHECK(train_window_count(150, 96, 48, 1) == 7);
    REQUIRE(tw.size() == 7);
    for (std::size_t i = 0; i < tw.size(); ++i) CHECK(tw[i].start == static_cast<std::int64_t>(i));
    // every train target lies wholly before the split
    for (const auto& w : tw) CHECK(w.start + w.h() + w.tau() <= ds.split);

    WindowSpec test{96, 48, 1, WindowSpec::Split::test};
    auto sw = windows(ds, test);
    CHECK(!sw.empty());
    for (const auto& w : sw) CHECK(w.start + w.h() >= ds.split);  // no train-target leakage

    WindowSpec strided{96, 48, 48, WindowSpec::Split::test};
    auto nv = windows(ds, strided);
    for (std::size_t i = 1; i < nv.size(); ++i)
        CHECK(nv[i].start - nv[i - 1].start == 48);  // non-overlapping targets

    SUBCASE("window count formula across shapes") {
        for (std::int64_t split : {144, 150, 170, 200}) {
            for (std::int64_t stride : {1, 3, 48}) {
                ds.split = split;
                WindowSpec s{96, 48, stride, WindowSpec::Split::train};
                CHECK(static_cast<std::int64_t>(windows(ds, s).size()) ==
                      train_window_count(split, 96, 48, stride));
            }
        }
    }

    SUBCASE("too-short dataset raises a state error") {
        SynthSpec tiny;
        tiny.length = 100;
        Dataset small = synth_sinusoid(tiny);
        WindowSpec s{96, 48, 1, WindowSpec::Split::train};
        CHECK_THROWS_AS(windows(small, s), StateError);
    }
}

TEST_CASE("windows are scaled with recoverable scale") {
    SynthSpec spec;
    spec.variates = 2;
    spec.length = 200;
    spec.seed = 13;
    Dataset ds = synth_sinusoid(spec);
    ds.split = 150;
    auto ws = windows(ds, {96, 48, 1, WindowSpec::Split::train});
    for (const auto& w : ws) {
        REQUIRE(w.scale.size() == 2);
        for (double s : w.scale) CHECK(s >= 1.0);
        for (std::int64_t t = 0; t < w.tau(); ++t)
            for (std::int64_t d = 0; d < 2; ++d)
                CHECK(w.target.at(t, d) * w.scale[static_cast<std::size_t>(d)] ==
                      doctest::Approx(ds.values.at(w.start + 96 + t, d)).epsilon(1e-12));
    }
}

TEST_CASE("synth_sinusoid determinism and structure") {
    SUBCASE("zero noise is exactly periodic plus linear trend") {
        SynthSpec spec;
        spec.variates = 1;
        spec.length = 120;
        spec.periods = {24};
        spec.noise_sigma = 0.0;
        spec.trend_max = 0.01;
        spec.seed = 5;
        Dataset ds = synth_sinusoid(spec);
        // difference out the trend: x[t+24] - x[t] must be constant
        const double delta = ds.values.at(24, 0) - ds.values.at(0, 0);
        for (std::int64_t t = 0; t + 24 < 120; ++t)
            CHECK(ds.values.at(t + 24, 0) - ds.values.at(t, 0) == doctest::Approx(delta).epsilon(1e-9));
    }
    SUBCASE("same seed gives identical datasets") {
        SynthSpec spec;
        spec.seed = 21;
        Dataset a = synth_sinusoid(spec);
        Dataset b = synth_sinusoid(spec);
        CHECK(a.values.values == b.values.values);
    }
    SUBCASE("columns average to zero over full periods (zero trend)") {
        SynthSpec spec;
        spec.variates = 4;
        spec.length = 2000;
        spec.periods = {20, 25, 40, 50};  // all divide 2000
        spec.noise_sigma = 0.1;
        spec.trend_max = 0.0;
        spec.seed = 31;
        Dataset ds = synth_sinusoid(spec);
        const double bound = 3.0 * spec.noise_sigma / std::sqrt(2000.0);
        for (std::int64_t d = 0; d < 4; ++d) {
            double mu = 0.0;
            for (std::int64_t t = 0; t < 2000; ++t) mu += ds.values.at(t, d);
            mu /= 2000.0;
            CHECK(std::abs(mu) < bound);
        }
    }
}

TEST_CASE("assign_split reserves the requested tail") {
    SynthSpec spec;
    spec.length = 1000;
    Dataset ds = synth_sinusoid(spec);
    assign_split(ds, 48);
    CHECK(ds.split == 1000 - 480);
    assign_split(ds, 48, 100);
    CHECK(ds.split == 900);
}
