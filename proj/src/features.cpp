#include "vf/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vf/error.hpp"
#include "vf/fft.hpp"
#include "vf/kernels.hpp"

namespace vf {

namespace {

// Below this length the direct O(N^2) autocorrelation is cheaper than three
// large FFTs.
constexpr size_t ACF_FFT_THRESHOLD = 2048;

struct Moments {
    double mean, m2, m3, m4;
};

Moments central_moments(std::span<const double> x) {
    const auto n = static_cast<double>(x.size());
    const double mean = kernels::sum(x.data(), x.size()) / n;
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    kernels::central_sums(x.data(), x.size(), mean, &s2, &s3, &s4);
    return {mean, s2 / n, s3 / n, s4 / n};
}

double median_of(std::span<const double> x) {
    std::vector<double> v(x.begin(), x.end());
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mode_of(std::span<const double> x) {
    std::map<long long, size_t> bins;
    for (const double v : x) ++bins[static_cast<long long>(std::floor(v + 0.5))];
    long long best = 0;
    size_t best_count = 0;
    for (const auto& [center, count] : bins) {
        if (count > best_count) { // strict: ties keep the smallest center
            best = center;
            best_count = count;
        }
    }
    return static_cast<double>(best);
}

StatFeatures stats_impl(const CleanSignal& s, bool* degenerate) {
    const auto& x = s.samples;
    if (x.size() < 2) fail(Errc::degenerate_signal, "need at least 2 samples");

    StatFeatures f;
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    f.min = *mn;
    f.max = *mx;
    f.range = f.max - f.min;
    const Moments m = central_moments(x);
    f.mean = m.mean;
    f.median = median_of(x);
    f.mode = mode_of(x);
    f.variance = m.m2;
    f.std_dev = std::sqrt(m.m2);
    *degenerate = !(m.m2 > 0.0);
    if (*degenerate) {
        f.skewness = 0.0;
        f.kurtosis = 3.0;
    } else {
        f.skewness = m.m3 / std::pow(m.m2, 1.5);
        f.kurtosis = m.m4 / (m.m2 * m.m2);
    }
    return f;
}

} // namespace

const std::array<const char*, FeatureVector::count>& FeatureVector::names() {
    static const std::array<const char*, count> n = {
        "min",  "max",      "range",    "mean",     "median",    "mode",
        "std",  "variance", "skewness", "kurtosis", "avg_power", "psd_total_power",
    };
    return n;
}

std::array<double, FeatureVector::count> FeatureVector::as_array() const {
    return {min, max, range, mean, median, mode, std_dev, variance, skewness, kurtosis, avg_power, psd_total_power};
}

FeatureVector FeatureVector::from_array(const std::array<double, count>& a) {
    FeatureVector f;
    f.min = a[0];
    f.max = a[1];
    f.range = a[2];
    f.mean = a[3];
    f.median = a[4];
    f.mode = a[5];
    f.std_dev = a[6];
    f.variance = a[7];
    f.skewness = a[8];
    f.kurtosis = a[9];
    f.avg_power = a[10];
    f.psd_total_power = a[11];
    return f;
}

std::vector<double> acf_biased(std::span<const double> s) {
    const size_t n = s.size();
    std::vector<double> r(n, 0.0);
    if (n == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(n);

    if (n <= ACF_FFT_THRESHOLD) {
        for (size_t k = 0; k < n; ++k)
            r[k] = kernels::dot(s.data(), s.data() + k, n - k) * inv_n;
        return r;
    }

    const size_t m = fft::next_pow2(2 * n);
    std::vector<fft::cd> a(m, fft::cd(0.0, 0.0));
    for (size_t i = 0; i < n; ++i) a[i] = fft::cd(s[i], 0.0);
    fft::fft_pow2(a, false);
    for (auto& z : a) z = fft::cd(std::norm(z), 0.0);
    fft::fft_pow2(a, true);
    for (size_t k = 0; k < n; ++k) r[k] = a[k].real() * inv_n;
    return r;
}

StatFeatures stat_features(const CleanSignal& s) {
    bool degenerate = false;
    StatFeatures f = stats_impl(s, &degenerate);
    if (degenerate) fail(Errc::degenerate_signal, "constant signal: skewness/kurtosis undefined");
    return f;
}

double averaged_power(const CleanSignal& s, size_t n1, size_t n2) {
    if (n1 > n2 || n2 >= s.samples.size()) fail(Errc::bad_range, "need 0 <= n1 <= n2 < len");
    const size_t len = n2 - n1 + 1;
    return kernels::sumsq(s.samples.data() + n1, len) / static_cast<double>(len);
}

PsdEstimate psd(const CleanSignal& s) {
    const size_t n = s.samples.size();
    if (n < 4) fail(Errc::too_short, "psd needs at least 4 samples");
    const double fs = s.fs_hz;

    const std::vector<double> r = acf_biased(s.samples);
    const std::vector<fft::cd> rt = fft::dft_real(r);

    // Two-sided density at bin j: (2 Re R[j] - r[0]) / fs, the transform of
    // the symmetric lag sequence r[-(N-1)..N-1].
    const size_t bins = n / 2 + 1;
    PsdEstimate p;
    p.bin_width_hz = fs / static_cast<double>(n);
    p.freqs_hz.resize(bins);
    p.density.resize(bins);
    std::vector<double> two_sided(bins);
    double peak = 0.0;
    for (size_t j = 0; j < bins; ++j) {
        p.freqs_hz[j] = static_cast<double>(j) * fs / static_cast<double>(n);
        two_sided[j] = (2.0 * rt[j].real() - r[0]) / fs;
        peak = std::max(peak, two_sided[j]);
    }
    // Roundoff in the transform can leave tiny negatives in near-empty bins;
    // anything beyond 1e-9 of the spectral peak is a real defect.
    const double neg_tol = -1e-9 * std::max(peak, 1.0);
    for (size_t j = 0; j < bins; ++j) {
        double v = two_sided[j];
        if (v < 0.0) {
            if (v < neg_tol) fail(Errc::internal, "psd produced a significantly negative density");
            v = 0.0;
        }
        const bool edge = j == 0 || (n % 2 == 0 && j == n / 2);
        p.density[j] = edge ? v : 2.0 * v;
    }
    return p;
}

double power_from_psd(const PsdEstimate& p) {
    return kernels::sum(p.density.data(), p.density.size()) * p.bin_width_hz;
}

FeatureVector extract_features(const CleanSignal& s) {
    if (s.samples.size() < 4) fail(Errc::too_short, "feature extraction needs at least 4 samples");

    bool degenerate = false;
    const StatFeatures st = stats_impl(s, &degenerate);

    FeatureVector f;
    f.min = st.min;
    f.max = st.max;
    f.range = st.range;
    f.mean = st.mean;
    f.median = st.median;
    f.mode = st.mode;
    f.std_dev = st.std_dev;
    f.variance = st.variance;
    f.skewness = st.skewness;
    f.kurtosis = st.kurtosis;
    f.avg_power = averaged_power(s, 0, s.samples.size() - 1);
    f.psd_total_power = power_from_psd(psd(s));
    return f;
}

std::string feature_csv_header() {
    std::string h = "stay_id";
    for (const char* name : FeatureVector::names()) {
        h += ",";
        h += name;
    }
    return h + ",label";
}

} // namespace vf
