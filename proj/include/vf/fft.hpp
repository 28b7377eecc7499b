#pragma once

#include <complex>
#include <vector>

namespace vf::fft {

using cd = std::complex<double>;

bool is_pow2(size_t n);
size_t next_pow2(size_t n);

// In-place iterative radix-2 transform; a.size() must be a power of two.
// inverse=true applies the 1/N factor.
void fft_pow2(std::vector<cd>& a, bool inverse);

// DFT of arbitrary length: X[j] = sum_k x[k] e^{-2pi i jk/N}. Power-of-two
// sizes go straight to fft_pow2; anything else through the Bluestein chirp,
// with the quadratic phase reduced mod 2N in exact integer arithmetic.
std::vector<cd> dft(const std::vector<cd>& x);

std::vector<cd> dft_real(const std::vector<double>& x);

} // namespace vf::fft
