#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "vf/signal.hpp"

namespace vf {

// The ten order-free statistics. Moments are population moments; skewness is
// m3/m2^1.5 and kurtosis m4/m2^2 (Pearson, normal -> 3). Mode is taken over
// 1 beat/min histogram bins, ties resolved to the smallest bin center.
struct StatFeatures {
    double min = 0, max = 0, range = 0, mean = 0, median = 0, mode = 0;
    double std_dev = 0, variance = 0, skewness = 0, kurtosis = 0;
};

// The twelve per-stay waveform features.
struct FeatureVector {
    double min = 0, max = 0, range = 0, mean = 0, median = 0, mode = 0;
    double std_dev = 0, variance = 0, skewness = 0, kurtosis = 0;
    double avg_power = 0, psd_total_power = 0;

    static constexpr size_t count = 12;
    static const std::array<const char*, count>& names();
    std::array<double, count> as_array() const;
    static FeatureVector from_array(const std::array<double, count>& a);
};

// One-sided power spectral density on [0, fs/2], interior bins carrying the
// two-sided weight, so that sum(density) * bin_width is the signal's mean
// square power.
struct PsdEstimate {
    std::vector<double> freqs_hz;
    std::vector<double> density; // units^2/Hz, nonnegative
    double bin_width_hz = 0.0;
};

// Biased autocorrelation r[k] = (1/N) sum_n s[n] s[n+k], k = 0..N-1.
// Direct dot products for short signals, FFT convolution for long ones.
std::vector<double> acf_biased(std::span<const double> s);

StatFeatures stat_features(const CleanSignal& s); // DegenerateSignal on constant input

// (1/(n2-n1+1)) * sum of squares over the inclusive index range.
double averaged_power(const CleanSignal& s, size_t n1, size_t n2);

// Correlogram estimate: transform of the biased autocorrelation of the
// mean-retained signal, evaluated on the N-point grid. Unlike the ten
// statistics and the full-range averaged power, this is order-sensitive.
PsdEstimate psd(const CleanSignal& s); // TooShort if fewer than 4 samples

// Discrete integral over the full (two-sided-equivalent) frequency space.
double power_from_psd(const PsdEstimate& p);

// All twelve features. On a constant signal the undefined moments take the
// documented sentinels (skewness 0, kurtosis 3).
FeatureVector extract_features(const CleanSignal& s);

// Feature-matrix CSV column set: stay_id, the 12 features, label.
std::string feature_csv_header();

} // namespace vf
