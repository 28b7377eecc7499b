#pragma once

#include <cstddef>

// Data-parallel inner loops behind the signal and model code. Each kernel has
// a scalar reference implementation and, on x86-64, an AVX2 variant; the
// active table is picked once at runtime (VITALFORGE_KERNELS=scalar|avx2
// overrides CPU detection). Variants are equivalence-tested against the
// scalar reference.
namespace vf::kernels {

struct Table {
    double (*sum)(const double*, size_t);
    double (*dot)(const double*, const double*, size_t);
    void (*axpy)(double, const double*, double*, size_t);
    double (*sumsq)(const double*, size_t);
    // One-pass centered power sums: sum (x-mu)^k for k = 2, 3, 4.
    void (*central_sums)(const double*, size_t, double, double*, double*, double*);
    void (*scale)(double, double*, size_t);
    const char* name;
};

const Table& active();
inline const char* backend() { return active().name; }

inline double sum(const double* x, size_t n) { return active().sum(x, n); }
inline double dot(const double* x, const double* y, size_t n) { return active().dot(x, y, n); }
inline void axpy(double a, const double* x, double* y, size_t n) { active().axpy(a, x, y, n); }
inline double sumsq(const double* x, size_t n) { return active().sumsq(x, n); }
inline void central_sums(const double* x, size_t n, double mu, double* m2, double* m3, double* m4) {
    active().central_sums(x, n, mu, m2, m3, m4);
}
inline void scale(double a, double* x, size_t n) { active().scale(a, x, n); }

namespace scalar {
double sum(const double* x, size_t n);
double dot(const double* x, const double* y, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
double sumsq(const double* x, size_t n);
void central_sums(const double* x, size_t n, double mu, double* m2, double* m3, double* m4);
void scale(double a, double* x, size_t n);
} // namespace scalar

#if defined(VF_HAVE_AVX2)
namespace avx2 {
double sum(const double* x, size_t n);
double dot(const double* x, const double* y, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
double sumsq(const double* x, size_t n);
void central_sums(const double* x, size_t n, double mu, double* m2, double* m3, double* m4);
void scale(double a, double* x, size_t n);
} // namespace avx2
#endif

} // namespace vf::kernels
