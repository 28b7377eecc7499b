#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "vf/error.hpp"
#include "vf/rng.hpp"
#include "vf/signal.hpp"

using namespace vf;

namespace {

constexpr double NAN_V = std::numeric_limits<double>::quiet_NaN();

WaveformRecord raw(std::vector<double> samples, double fs = 1.0) {
    WaveformRecord r;
    r.header.subject_id = "p000001";
    r.header.fs_hz = fs;
    r.header.n_samples = samples.size();
    r.samples = std::move(samples);
    return r;
}

CleanSignal sig(std::vector<double> samples, double fs = 1.0) { return CleanSignal{std::move(samples), fs}; }

// Naive forward-fill, independent of the implementation.
std::vector<double> ffill_oracle(const std::vector<double>& in) {
    std::vector<double> out;
    double last = NAN_V;
    bool started = false;
    for (const double v : in) {
        const bool valid = std::isfinite(v) && v != 0.0;
        if (valid) {
            last = v;
            started = true;
        }
        if (started) out.push_back(valid ? v : last);
    }
    return out;
}

// Naive O(n*w) centered mean with shrinking edges.
std::vector<double> ma_oracle(const std::vector<double>& x, int w) {
    const int n = static_cast<int>(x.size());
    const int h = w / 2;
    std::vector<double> out(x.size());
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        int cnt = 0;
        for (int j = std::max(0, i - h); j <= std::min(n - 1, i + h); ++j) {
            acc += x[static_cast<size_t>(j)];
            ++cnt;
        }
        out[static_cast<size_t>(i)] = acc / cnt;
    }
    return out;
}

// Direct convolution with replicate padding.
std::vector<double> conv_oracle(const std::vector<double>& x, const std::vector<double>& taps) {
    const int n = static_cast<int>(x.size());
    const int nt = static_cast<int>(taps.size());
    const int h = nt / 2;
    std::vector<double> out(x.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < nt; ++j) {
            int k = i + j - h;
            k = std::clamp(k, 0, n - 1);
            acc += taps[static_cast<size_t>(j)] * x[static_cast<size_t>(k)];
        }
        out[static_cast<size_t>(i)] = acc;
    }
    return out;
}

double dtft_mag(const std::vector<double>& taps, double freq_hz, double fs_hz) {
    double re = 0.0, im = 0.0;
    for (size_t k = 0; k < taps.size(); ++k) {
        const double a = -2.0 * M_PI * freq_hz / fs_hz * static_cast<double>(k);
        re += taps[k] * std::cos(a);
        im += taps[k] * std::sin(a);
    }
    return std::hypot(re, im);
}

} // namespace

TEST_CASE("clean: truncation and forward fill") {
    const CleanSignal c = clean(raw({0, 70, NAN_V, 72}));
    CHECK(c.samples == std::vector<double>{70, 70, 72});

    CHECK_THROWS_AS((void)clean(raw({NAN_V, 0, 0})), VfError);
    try {
        (void)clean(raw({NAN_V, 0, 0}));
    } catch (const VfError& e) {
        CHECK(e.code() == Errc::all_invalid);
    }

    SUBCASE("matches the forward-fill oracle on noisy inputs") {
        Rng r(17);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> in;
            const size_t n = 1 + r.below(500);
            for (size_t i = 0; i < n; ++i) {
                const double roll = r.uniform01();
                if (roll < 0.05)
                    in.push_back(NAN_V);
                else if (roll < 0.10)
                    in.push_back(0.0);
                else
                    in.push_back(r.uniform(40, 180));
            }
            const auto expect = ffill_oracle(in);
            if (expect.empty()) {
                CHECK_THROWS_AS((void)clean(raw(in)), VfError);
                continue;
            }
            CHECK(clean(raw(in)).samples == expect);
        }
    }
    SUBCASE("idempotent") {
        Rng r(18);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> in;
            for (size_t i = 0; i < 100; ++i)
                in.push_back(r.uniform01() < 0.1 ? NAN_V : r.uniform(40, 180));
            const CleanSignal once = clean(raw(in));
            const CleanSignal twice = clean(raw(once.samples));
            CHECK(once.samples == twice.samples);
        }
    }
}

TEST_CASE("moving_average") {
    CHECK_THROWS_AS((void)moving_average(sig({1, 2, 3}), 2), VfError);
    CHECK_THROWS_AS((void)moving_average(sig({1, 2, 3}), 0), VfError);

    CHECK(moving_average(sig({5, 5, 5, 5}), 3).samples == std::vector<double>{5, 5, 5, 5});
    CHECK(moving_average(sig({0, 3, 6, 9}), 3).samples == std::vector<double>{1.5, 3, 6, 7.5});
    CHECK(moving_average(sig({1, 9, 4}), 1).samples == std::vector<double>{1, 9, 4});

    SUBCASE("matches windowed-mean oracle and stays within the input range") {
        Rng r(19);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> x;
            const size_t n = 1 + r.below(400);
            for (size_t i = 0; i < n; ++i) x.push_back(r.uniform(-50, 250));
            const int w = 1 + 2 * static_cast<int>(r.below(6));
            const auto got = moving_average(sig(x), w).samples;
            const auto expect = ma_oracle(x, w);
            REQUIRE(got.size() == expect.size());
            const double lo = *std::min_element(x.begin(), x.end());
            const double hi = *std::max_element(x.begin(), x.end());
            for (size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-13));
                CHECK(got[i] >= lo - 1e-9);
                CHECK(got[i] <= hi + 1e-9);
            }
        }
    }
}

TEST_CASE("design_lowpass") {
    CHECK_THROWS_AS((void)design_lowpass(0.6, 31, 1.0), VfError);
    CHECK_THROWS_AS((void)design_lowpass(0.0, 31, 1.0), VfError);
    CHECK_THROWS_AS((void)design_lowpass(0.2, 30, 1.0), VfError);

    const FirFilter f = design_lowpass(0.2, 31, 1.0);
    REQUIRE(f.taps.size() == 31);

    double total = 0.0;
    for (const double t : f.taps) total += t;
    CHECK(std::abs(total - 1.0) <= 1e-12);

    for (size_t k = 0; k < f.taps.size(); ++k) CHECK(f.taps[k] == f.taps[f.taps.size() - 1 - k]);

    // >= 20 dB attenuation in the stopband at 0.45 Hz.
    CHECK(dtft_mag(f.taps, 0.45, 1.0) < std::pow(10.0, -20.0 / 20.0));
    CHECK(dtft_mag(f.taps, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("apply_fir") {
    const FirFilter f = design_lowpass(0.2, 31, 1.0);

    SUBCASE("constant unchanged") {
        const auto out = apply_fir(sig(std::vector<double>(100, 72.5)), f);
        for (const double v : out.samples) CHECK(v == doctest::Approx(72.5).epsilon(1e-12));
    }
    SUBCASE("interior impulse reproduces centered taps") {
        std::vector<double> x(101, 0.0);
        x[50] = 1.0;
        const auto out = apply_fir(sig(x), f);
        for (int j = -15; j <= 15; ++j)
            CHECK(out.samples[static_cast<size_t>(50 + j)] ==
                  doctest::Approx(f.taps[static_cast<size_t>(15 + j)]).epsilon(1e-12));
    }
    SUBCASE("matches direct convolution oracle") {
        Rng r(23);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> x;
            const size_t n = 1 + r.below(300);
            for (size_t i = 0; i < n; ++i) x.push_back(r.uniform(-5, 5));
            const auto got = apply_fir(sig(x), f).samples;
            const auto expect = conv_oracle(x, f.taps);
            for (size_t i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("resample_to_1hz") {
    SUBCASE("identity at 1 Hz") {
        const auto s = sig({60, 61, 62});
        const auto out = resample_to_1hz(s);
        CHECK(out.samples == s.samples);
        CHECK(out.fs_hz == 1.0);
    }
    SUBCASE("linear midpoint on the pre-filter grid") {
        CHECK(lerp_grid_1hz(sig({60, 80}, 0.5)) == std::vector<double>{60, 70, 80});
    }
    SUBCASE("output length floor((n-1)/fs)+1") {
        const auto grid = lerp_grid_1hz(sig(std::vector<double>(100, 70.0), 0.17));
        CHECK(grid.size() == 583);
        const auto out = resample_to_1hz(sig(std::vector<double>(100, 70.0), 0.17));
        CHECK(out.samples.size() == 583);
        CHECK(out.fs_hz == 1.0);
    }
    SUBCASE("constants preserved at every grid point") {
        for (const double fs : {0.17, 0.25, 0.5}) {
            const auto out = resample_to_1hz(sig(std::vector<double>(40, 73.25), fs));
            for (const double v : out.samples) CHECK(v == doctest::Approx(73.25).epsilon(1e-12));
        }
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS((void)resample_to_1hz(sig({70}, 0.5)), VfError);
    }
    SUBCASE("band-limited mean preserved within 1%") {
        // 0.005 Hz sinusoid at fs=0.5, well under the 0.225 Hz default cutoff.
        std::vector<double> x;
        for (int i = 0; i < 400; ++i)
            x.push_back(80.0 + 10.0 * std::sin(2.0 * M_PI * 0.005 * static_cast<double>(i) / 0.5));
        WaveformRecord r = raw(x, 0.5);
        const CleanSignal out = preprocess(r);
        double mean_in = 0.0, mean_out = 0.0;
        for (const double v : x) mean_in += v;
        mean_in /= static_cast<double>(x.size());
        for (const double v : out.samples) mean_out += v;
        mean_out /= static_cast<double>(out.samples.size());
        CHECK(std::abs(mean_out - mean_in) / mean_in < 0.01);
    }
}
