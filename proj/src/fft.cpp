#include "vf/fft.hpp"

#include <cmath>

namespace vf::fft {

namespace {

constexpr double PI = 3.141592653589793238462643383279502884;

// e^{-i pi m / n} with m already reduced to [0, 2n).
cd unit_phase(uint64_t m, uint64_t n) {
    const double a = -PI * static_cast<double>(m) / static_cast<double>(n);
    return cd(std::cos(a), std::sin(a));
}

} // namespace

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_pow2(std::vector<cd>& a, bool inverse) {
    const size_t n = a.size();
    if (n <= 1) return;
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * PI / static_cast<double>(len);
        const cd wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const cd u = a[i + k];
                const cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& z : a) z *= inv;
    }
}

std::vector<cd> dft(const std::vector<cd>& x) {
    const size_t n = x.size();
    if (n == 0) return {};
    if (is_pow2(n)) {
        std::vector<cd> a = x;
        fft_pow2(a, false);
        return a;
    }

    // Bluestein: X[j] = w(j) * (a conv b)[j], a[k] = x[k] w(k), b[k] = 1/w(k),
    // w(k) = e^{-i pi k^2 / n}. k^2 mod 2n keeps the chirp phase accurate for
    // large n.
    const size_t m = next_pow2(2 * n - 1);
    const uint64_t two_n = 2 * static_cast<uint64_t>(n);
    std::vector<cd> a(m, cd(0.0, 0.0));
    std::vector<cd> b(m, cd(0.0, 0.0));
    std::vector<cd> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        const uint64_t q = (static_cast<uint64_t>(k) * k) % two_n;
        chirp[k] = unit_phase(q, n);
        a[k] = x[k] * chirp[k];
        const cd inv = std::conj(chirp[k]);
        b[k] = inv;
        if (k != 0) b[m - k] = inv;
    }
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);

    std::vector<cd> out(n);
    for (size_t j = 0; j < n; ++j) out[j] = a[j] * chirp[j];
    return out;
}

std::vector<cd> dft_real(const std::vector<double>& x) {
    std::vector<cd> z(x.size());
    for (size_t i = 0; i < x.size(); ++i) z[i] = cd(x[i], 0.0);
    return dft(z);
}

} // namespace vf::fft
