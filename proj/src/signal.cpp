#include "vf/signal.hpp"

#include <algorithm>
#include <cmath>

#include "vf/error.hpp"
#include "vf/kernels.hpp"

namespace vf {

namespace {

constexpr double PI = 3.141592653589793238462643383279502884;

bool valid_sample(double v) { return std::isfinite(v) && v != 0.0; }

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = PI * x;
    return std::sin(px) / px;
}

} // namespace

CleanSignal clean(const WaveformRecord& raw) {
    const auto& in = raw.samples;
    size_t first = 0;
    while (first < in.size() && !valid_sample(in[first])) ++first;
    if (first == in.size()) fail(Errc::all_invalid, "record has no valid sample");

    CleanSignal out;
    out.fs_hz = raw.header.fs_hz;
    out.samples.reserve(in.size() - first);
    double last = in[first];
    for (size_t i = first; i < in.size(); ++i) {
        if (valid_sample(in[i])) last = in[i];
        out.samples.push_back(last);
    }
    return out;
}

CleanSignal moving_average(const CleanSignal& s, int window) {
    if (window < 1 || window % 2 == 0) fail(Errc::bad_window, "window must be odd and >= 1");
    if (window == 1) return s;

    const size_t n = s.samples.size();
    const size_t half = static_cast<size_t>(window / 2);
    CleanSignal out;
    out.fs_hz = s.fs_hz;
    out.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t lo = i >= half ? i - half : 0;
        const size_t hi = std::min(n - 1, i + half);
        const size_t len = hi - lo + 1;
        out.samples[i] = kernels::sum(s.samples.data() + lo, len) / static_cast<double>(len);
    }
    return out;
}

FirFilter design_lowpass(double cutoff_hz, int n_taps, double fs_hz) {
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs_hz / 2.0))
        fail(Errc::bad_cutoff, "cutoff must satisfy 0 < cutoff < fs/2");
    if (n_taps < 1 || n_taps % 2 == 0) fail(Errc::bad_tap_count, "tap count must be odd and >= 1");

    FirFilter f;
    f.cutoff_hz = cutoff_hz;
    f.taps.resize(static_cast<size_t>(n_taps));
    const int m = (n_taps - 1) / 2;
    const double fc = cutoff_hz / fs_hz; // normalized
    for (int k = 0; k < n_taps; ++k) {
        const double ideal = 2.0 * fc * sinc(2.0 * fc * (k - m));
        const double hamming =
            n_taps == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * PI * k / static_cast<double>(n_taps - 1));
        f.taps[static_cast<size_t>(k)] = ideal * hamming;
    }
    // Unity DC gain; enforce exact symmetry against rounding drift.
    const double total = kernels::sum(f.taps.data(), f.taps.size());
    kernels::scale(1.0 / total, f.taps.data(), f.taps.size());
    for (int k = 0; k < m; ++k)
        f.taps[static_cast<size_t>(n_taps - 1 - k)] = f.taps[static_cast<size_t>(k)];
    return f;
}

CleanSignal apply_fir(const CleanSignal& s, const FirFilter& f) {
    const size_t n = s.samples.size();
    const size_t nt = f.taps.size();
    if (n == 0) fail(Errc::too_short, "cannot filter an empty signal");
    const size_t half = nt / 2;

    std::vector<double> padded(n + nt - 1);
    std::fill(padded.begin(), padded.begin() + half, s.samples.front());
    std::copy(s.samples.begin(), s.samples.end(), padded.begin() + half);
    std::fill(padded.begin() + half + n, padded.end(), s.samples.back());

    CleanSignal out;
    out.fs_hz = s.fs_hz;
    out.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        out.samples[i] = kernels::dot(f.taps.data(), padded.data() + i, nt);
    return out;
}

std::vector<double> lerp_grid_1hz(const CleanSignal& s) {
    const size_t n = s.samples.size();
    if (n < 2) fail(Errc::too_short, "need at least 2 samples to resample");
    if (!(s.fs_hz > 0.0) || s.fs_hz > 1.0) fail(Errc::bad_sample_rate, "resampler expects fs in (0, 1]");

    const double duration = static_cast<double>(n - 1) / s.fs_hz;
    const size_t out_n = static_cast<size_t>(std::floor(duration)) + 1;
    std::vector<double> out(out_n);
    for (size_t k = 0; k < out_n; ++k) {
        const double src = static_cast<double>(k) * s.fs_hz; // fractional source index
        size_t i = static_cast<size_t>(src);
        if (i >= n - 1) i = n - 2;
        const double frac = src - static_cast<double>(i);
        out[k] = s.samples[i] + frac * (s.samples[i + 1] - s.samples[i]);
    }
    return out;
}

CleanSignal resample_to_1hz(const CleanSignal& s, const PrepConfig& cfg) {
    if (!(s.fs_hz > 0.0) || s.fs_hz > 1.0) fail(Errc::bad_sample_rate, "resampler expects fs in (0, 1]");
    if (s.fs_hz == 1.0) return s;

    CleanSignal up;
    up.fs_hz = 1.0;
    up.samples = lerp_grid_1hz(s);

    double cutoff = cfg.fir_cutoff_hz;
    if (cutoff <= 0.0) cutoff = 0.9 * std::min(s.fs_hz / 2.0, 0.5);
    const FirFilter f = design_lowpass(cutoff, cfg.fir_taps, 1.0);
    return apply_fir(up, f);
}

CleanSignal preprocess(const WaveformRecord& raw, const PrepConfig& cfg) {
    CleanSignal s = clean(raw);
    s = moving_average(s, cfg.smooth_window);
    if (s.fs_hz == 1.0) return s;
    return resample_to_1hz(s, cfg);
}

} // namespace vf
