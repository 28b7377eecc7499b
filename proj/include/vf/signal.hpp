#pragma once

#include <vector>

#include "vf/record.hpp"

namespace vf {

// Uniformly sampled signal with every sample finite. Produced by clean() and
// carried through the rest of the preprocessing chain.
struct CleanSignal {
    std::vector<double> samples;
    double fs_hz = 1.0;
};

// Linear-phase low-pass: odd symmetric taps, unity DC gain.
struct FirFilter {
    std::vector<double> taps;
    double cutoff_hz = 0.0;
};

struct PrepConfig {
    int smooth_window = 5;     // moving-average width, odd
    int fir_taps = 31;         // odd
    double fir_cutoff_hz = 0.0; // 0 -> 0.9 * min(fs_orig/2, 0.5)
};

// Drops leading invalid samples (undefined, zero, non-finite) and forward-
// fills the rest. Throws AllInvalid when no valid sample exists.
CleanSignal clean(const WaveformRecord& raw);

// Centered window of nominal odd size `window`, shrunk at the edges.
CleanSignal moving_average(const CleanSignal& s, int window);

// Hamming-windowed sinc, normalized to unity DC gain.
FirFilter design_lowpass(double cutoff_hz, int n_taps, double fs_hz);

// Zero-phase filtering via the symmetric taps with edge replication; output
// length equals input length.
CleanSignal apply_fir(const CleanSignal& s, const FirFilter& f);

// Linear interpolation onto the 1 Hz grid spanning the original duration
// (no filtering). Exposed separately from resample_to_1hz for testing.
std::vector<double> lerp_grid_1hz(const CleanSignal& s);

// Interpolate to 1 Hz, then suppress interpolation images with the
// anti-aliasing FIR. fs_hz == 1 passes through untouched.
CleanSignal resample_to_1hz(const CleanSignal& s, const PrepConfig& cfg = {});

// clean -> moving_average -> resample_to_1hz
CleanSignal preprocess(const WaveformRecord& raw, const PrepConfig& cfg = {});

} // namespace vf
