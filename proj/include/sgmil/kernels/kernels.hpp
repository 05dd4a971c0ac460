#pragma once

// Dense double-precision kernels behind the differentiable core.
//
// Every kernel has a portable scalar reference and, when the toolchain supports it,
// AVX2+FMA and AVX-512F variants. The widest supported variant is chosen once at startup
// from CPUID; the SGMIL_ISA environment variable (`scalar`, `avx2` or `avx512`) overrides
// the choice.
// All matrices are row-major with explicit leading dimensions.

#include <cstddef>
#include <string_view>
#include <vector>

namespace sgmil::kernels {

enum class Trans : bool { no = false, yes = true };

enum class Isa { scalar, avx2, avx512 };

/// C(m x n) = op(A)(m x k) * op(B)(k x n) + beta * C. When beta == 0, C is not read.
using GemmFn = void (*)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                        const double* a, std::size_t lda, const double* b, std::size_t ldb,
                        double beta, double* c, std::size_t ldc);
/// y += alpha * x
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x, double* y);
using SumFn = double (*)(std::size_t n, const double* x);

struct KernelTable {
    Isa isa;
    std::string_view name;
    GemmFn gemm;
    AxpyFn axpy;
    SumFn sum;
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();
/// nullptr when the AVX-512 variant was not compiled in.
const KernelTable* avx512_kernels();

bool cpu_supports_avx2_fma();
bool cpu_supports_avx512();

/// Every table that is both compiled in and runnable on this CPU; scalar first.
std::vector<const KernelTable*> available_kernels();

/// The table used by the library. Resolved on first call.
const KernelTable& active();

/// Force a specific variant (tests, benchmarking). Throws ConfigError if unavailable.
void select(Isa isa);

inline void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
                 std::size_t ldc) {
    active().gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc);
}

inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
    active().axpy(n, alpha, x, y);
}

inline double sum(std::size_t n, const double* x) { return active().sum(n, x); }

}  // namespace sgmil::kernels
