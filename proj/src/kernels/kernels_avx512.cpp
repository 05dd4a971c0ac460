// AVX-512F variant: 8 x 16 register tile (sixteen zmm accumulators). Compiled with
// -mavx512f -mfma; entered only when the CPU reports avx512f.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "sgmil/kernels/kernels.hpp"

namespace sgmil::kernels {
namespace {

constexpr std::size_t kMr = 8;
constexpr std::size_t kNr = 16;
constexpr std::size_t kKc = 256;

void pack_a(Trans ta, const double* a, std::size_t lda, std::size_t m, std::size_t p0, std::size_t kc,
            double* out) {
    for (std::size_t i0 = 0; i0 < m; i0 += kMr) {
        const std::size_t rows = std::min(kMr, m - i0);
        if (ta == Trans::yes && rows == kMr) {
            for (std::size_t p = 0; p < kc; ++p)
                _mm512_storeu_pd(out + p * kMr, _mm512_loadu_pd(a + (p0 + p) * lda + i0));
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
                for (std::size_t r = 0; r < kMr; ++r) out[p * kMr + r] = r < rows ? a[(p0 + p) * lda + i0 + r] : 0.0;
        }
        out += kc * kMr;
    }
}

void pack_b(Trans tb, const double* b, std::size_t ldb, std::size_t n, std::size_t p0, std::size_t kc,
            double* out) {
    for (std::size_t j0 = 0; j0 < n; j0 += kNr) {
        const std::size_t cols = std::min(kNr, n - j0);
        if (tb == Trans::no) {
            const __mmask8 lo = static_cast<__mmask8>(cols >= 8 ? 0xff : (1u << cols) - 1);
            const __mmask8 hi = static_cast<__mmask8>(cols >= 16 ? 0xff : cols <= 8 ? 0 : (1u << (cols - 8)) - 1);
            for (std::size_t p = 0; p < kc; ++p) {
                const double* src = b + (p0 + p) * ldb + j0;
                _mm512_storeu_pd(out + p * kNr, _mm512_maskz_loadu_pd(lo, src));
                _mm512_storeu_pd(out + p * kNr + 8, _mm512_maskz_loadu_pd(hi, src + 8));
            }
        } else {
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

// Adds (or, with `overwrite`, stores) the 8 x 16 product of two packed panels into C,
// masking the ragged right edge and skipping rows beyond `rows`.
inline void micro_kernel(std::size_t kc, const double* ap, const double* bp, double* c, std::size_t ldc,
                         std::size_t rows, std::size_t cols, double beta, bool overwrite) {
    __m512d acc[kMr][2];
    for (auto& r : acc) r[0] = r[1] = _mm512_setzero_pd();
    for (std::size_t p = 0; p < kc; ++p) {
        const __m512d b0 = _mm512_loadu_pd(bp);
        const __m512d b1 = _mm512_loadu_pd(bp + 8);
        for (std::size_t r = 0; r < kMr; ++r) {
            const __m512d a = _mm512_set1_pd(ap[r]);
            acc[r][0] = _mm512_fmadd_pd(a, b0, acc[r][0]);
            acc[r][1] = _mm512_fmadd_pd(a, b1, acc[r][1]);
        }
        ap += kMr;
        bp += kNr;
    }
    const __mmask8 lo = static_cast<__mmask8>(cols >= 8 ? 0xff : (1u << cols) - 1);
    const __mmask8 hi = static_cast<__mmask8>(cols >= 16 ? 0xff : cols <= 8 ? 0 : (1u << (cols - 8)) - 1);
    const __m512d vb = _mm512_set1_pd(beta);
    for (std::size_t r = 0; r < rows; ++r) {
        double* crow = c + r * ldc;
        if (overwrite) {
            _mm512_mask_storeu_pd(crow, lo, acc[r][0]);
            _mm512_mask_storeu_pd(crow + 8, hi, acc[r][1]);
        } else {
            const __m512d c0 = _mm512_maskz_loadu_pd(lo, crow);
            const __m512d c1 = _mm512_maskz_loadu_pd(hi, crow + 8);
            _mm512_mask_storeu_pd(crow, lo, _mm512_fmadd_pd(vb, c0, acc[r][0]));
            _mm512_mask_storeu_pd(crow + 8, hi, _mm512_fmadd_pd(vb, c1, acc[r][1]));
        }
    }
}

void gemm_avx512(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc) {
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

    for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
        const std::size_t kc = std::min(kKc, k - p0);
        const bool first = p0 == 0;
        const bool overwrite = first && beta == 0.0;
        const double scale = first ? beta : 1.0;
        pack_a(ta, a, lda, m, p0, kc, apack.data());
        pack_b(tb, b, ldb, n, p0, kc, bpack.data());
        for (std::size_t jp = 0; jp < n_panels; ++jp) {
            const std::size_t j0 = jp * kNr;
            for (std::size_t ip = 0; ip < m_panels; ++ip) {
                const std::size_t i0 = ip * kMr;
                micro_kernel(kc, apack.data() + ip * kc * kMr, bpack.data() + jp * kc * kNr, c + i0 * ldc + j0, ldc,
                             std::min(kMr, m - i0), std::min(kNr, n - j0), scale, overwrite);
            }
        }
    }
}

void axpy_avx512(std::size_t n, double alpha, const double* x, double* y) {
    const __m512d va = _mm512_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_avx512(std::size_t n, const double* x) {
    __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        s0 = _mm512_add_pd(s0, _mm512_loadu_pd(x + i));
        s1 = _mm512_add_pd(s1, _mm512_loadu_pd(x + i + 8));
    }
    double s = _mm512_reduce_add_pd(_mm512_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const KernelTable& avx512_kernel_table() {
    static const KernelTable table{Isa::avx512, "avx512", &gemm_avx512, &axpy_avx512, &sum_avx512};
    return table;
}

}  // namespace sgmil::kernels
