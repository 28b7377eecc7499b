#include "vf/kernels.hpp"

namespace vf::kernels::scalar {

double sum(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sumsq(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void central_sums(const double* x, size_t n, double mu, double* m2, double* m3, double* m4) {
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = x[i] - mu;
        const double d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    *m2 = s2;
    *m3 = s3;
    *m4 = s4;
}

void scale(double a, double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) x[i] *= a;
}

} // namespace vf::kernels::scalar
