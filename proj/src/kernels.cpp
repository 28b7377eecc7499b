#include "vf/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace vf::kernels {

namespace {

constexpr Table scalar_table = {
    scalar::sum, scalar::dot, scalar::axpy, scalar::sumsq, scalar::central_sums, scalar::scale, "scalar",
};

#if defined(VF_HAVE_AVX2)
constexpr Table avx2_table = {
    avx2::sum, avx2::dot, avx2::axpy, avx2::sumsq, avx2::central_sums, avx2::scale, "avx2",
};
#endif

const Table& pick() {
    const char* force = std::getenv("VITALFORGE_KERNELS");
    if (force != nullptr) {
        if (std::strcmp(force, "scalar") == 0) return scalar_table;
#if defined(VF_HAVE_AVX2)
        if (std::strcmp(force, "avx2") == 0 && __builtin_cpu_supports("avx2")) return avx2_table;
#endif
        return scalar_table;
    }
#if defined(VF_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) return avx2_table;
#endif
    return scalar_table;
}

} // namespace

const Table& active() {
    static const Table& t = pick();
    return t;
}

} // namespace vf::kernels
