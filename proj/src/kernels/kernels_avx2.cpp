// AVX2 + FMA variant. This translation unit is compiled with -mavx2 -mfma and must only
// be entered after cpu_supports_avx2_fma() returned true.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "sgmil/kernels/kernels.hpp"

namespace sgmil::kernels {
namespace {

constexpr std::size_t kMr = 4;    // rows of C per micro-tile
constexpr std::size_t kNr = 8;    // columns of C per micro-tile (two ymm registers)
constexpr std::size_t kKc = 256;  // depth of one packed block

// Packs rows [0, m) x depth [p0, p0 + kc) of op(A) into kMr-row panels, zero padded.
void pack_a(Trans ta, const double* a, std::size_t lda, std::size_t m, std::size_t p0,
            std::size_t kc, double* out) {
    for (std::size_t i0 = 0; i0 < m; i0 += kMr) {
        const std::size_t rows = std::min(kMr, m - i0);
        if (ta == Trans::yes && rows == kMr) {
            for (std::size_t p = 0; p < kc; ++p)
                _mm256_storeu_pd(out + p * kMr, _mm256_loadu_pd(a + (p0 + p) * lda + i0));
        } else if (ta == Trans::no) {
            for (std::size_t r = 0; r < kMr; ++r) {
                if (r < rows) {
                    const double* src = a + (i0 + r) * lda + p0;
                    for (std::size_t p = 0; p < kc; ++p) out[p * kMr + r] = src[p];
                } else {
                    for (std::size_t p = 0; p < kc; ++p) out[p * kMr + r] = 0.0;
                }
            }
        } else {
            for (std::size_t p = 0; p < kc; ++p)
                for (std::size_t r = 0; r < kMr; ++r)
                    out[p * kMr + r] = r < rows ? a[(p0 + p) * lda + i0 + r] : 0.0;
        }
        out += kc * kMr;
    }
}

// Packs depth [p0, p0 + kc) x columns [0, n) of op(B) into kNr-column panels, zero padded.
void pack_b(Trans tb, const double* b, std::size_t ldb, std::size_t n, std::size_t p0,
            std::size_t kc, double* out) {
    for (std::size_t j0 = 0; j0 < n; j0 += kNr) {
        const std::size_t cols = std::min(kNr, n - j0);
        if (tb == Trans::no) {
            if (cols == kNr) {
                for (std::size_t p = 0; p < kc; ++p) {
                    const double* src = b + (p0 + p) * ldb + j0;
                    _mm256_storeu_pd(out + p * kNr, _mm256_loadu_pd(src));
                    _mm256_storeu_pd(out + p * kNr + 4, _mm256_loadu_pd(src + 4));
                }
            } else {
                for (std::size_t p = 0; p < kc; ++p) {
                    const double* src = b + (p0 + p) * ldb + j0;
                    for (std::size_t c = 0; c < kNr; ++c) out[p * kNr + c] = c < cols ? src[c] : 0.0;
                }
            }
        } else {
            // op(B)[p, j] = b[j * ldb + p]: each column of the panel is a contiguous run.
            for (std::size_t c = 0; c < kNr; ++c) {
                if (c < cols) {
                    const double* src = b + (j0 + c) * ldb + p0;
                    for (std::size_t p = 0; p < kc; ++p) out[p * kNr + c] = src[p];
                } else {
                    for (std::size_t p = 0; p < kc; ++p) out[p * kNr + c] = 0.0;
                }
            }
        }
        out += kc * kNr;
    }
}

// acc(kMr x kNr) = sum_p apanel[p, :]^T * bpanel[p, :]
inline void micro_kernel(std::size_t kc, const double* ap, const double* bp, double* acc) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < kc; ++p) {
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        __m256d a = _mm256_broadcast_sd(ap);
        c00 = _mm256_fmadd_pd(a, b0, c00);
        c01 = _mm256_fmadd_pd(a, b1, c01);
        a = _mm256_broadcast_sd(ap + 1);
        c10 = _mm256_fmadd_pd(a, b0, c10);
        c11 = _mm256_fmadd_pd(a, b1, c11);
        a = _mm256_broadcast_sd(ap + 2);
        c20 = _mm256_fmadd_pd(a, b0, c20);
        c21 = _mm256_fmadd_pd(a, b1, c21);
        a = _mm256_broadcast_sd(ap + 3);
        c30 = _mm256_fmadd_pd(a, b0, c30);
        c31 = _mm256_fmadd_pd(a, b1, c31);
        ap += kMr;
        bp += kNr;
    }
    _mm256_storeu_pd(acc + 0, c00);
    _mm256_storeu_pd(acc + 4, c01);
    _mm256_storeu_pd(acc + 8, c10);
    _mm256_storeu_pd(acc + 12, c11);
    _mm256_storeu_pd(acc + 16, c20);
    _mm256_storeu_pd(acc + 20, c21);
    _mm256_storeu_pd(acc + 24, c30);
    _mm256_storeu_pd(acc + 28, c31);
}

void gemm_avx2(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
               std::size_t ldc) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == 0.0 ? 0.0 : beta * c[i * ldc + j];
        return;
    }
    const std::size_t m_panels = (m + kMr - 1) / kMr;
    const std::size_t n_panels = (n + kNr - 1) / kNr;
    thread_local std::vector<double> apack, bpack;
    apack.resize(m_panels * kMr * std::min(k, kKc));
    bpack.resize(n_panels * kNr * std::min(k, kKc));
    alignas(32) double acc[kMr * kNr];

    for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
        const std::size_t kc = std::min(kKc, k - p0);
        const bool first = p0 == 0;
        pack_a(ta, a, lda, m, p0, kc, apack.data());
        pack_b(tb, b, ldb, n, p0, kc, bpack.data());
        for (std::size_t jp = 0; jp < n_panels; ++jp) {
            const double* bp = bpack.data() + jp * kc * kNr;
            const std::size_t j0 = jp * kNr;
            const std::size_t cols = std::min(kNr, n - j0);
            for (std::size_t ip = 0; ip < m_panels; ++ip) {
                const std::size_t i0 = ip * kMr;
                const std::size_t rows = std::min(kMr, m - i0);
                micro_kernel(kc, apack.data() + ip * kc * kMr, bp, acc);
                for (std::size_t r = 0; r < rows; ++r) {
                    double* crow = c + (i0 + r) * ldc + j0;
                    const double* arow = acc + r * kNr;
                    if (first && beta == 0.0) {
                        for (std::size_t q = 0; q < cols; ++q) crow[q] = arow[q];
                    } else {
                        const double scale = first ? beta : 1.0;
                        for (std::size_t q = 0; q < cols; ++q) crow[q] = arow[q] + scale * crow[q];
                    }
                }
            }
        }
    }
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_avx2(std::size_t n, const double* x) {
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
        s1 = _mm256_add_pd(s1, _mm256_loadu_pd(x + i + 4));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, _mm256_add_pd(s0, s1));
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const KernelTable& avx2_kernel_table() {
    static const KernelTable table{Isa::avx2, "avx2", &gemm_avx2, &axpy_avx2, &sum_avx2};
    return table;
}

}  // namespace sgmil::kernels
