#include "sgmil/kernels/kernels.hpp"

namespace sgmil::kernels {
namespace {

inline double at(Trans t, const double* m, std::size_t ld, std::size_t r, std::size_t c) {
    return t == Trans::no ? m[r * ld + c] : m[c * ld + r];
}

void gemm_scalar(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
                 std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += at(ta, a, lda, i, p) * at(tb, b, ldb, p, j);
            double& out = c[i * ldc + j];
            out = beta == 0.0 ? acc : acc + beta * out;
        }
    }
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_scalar(std::size_t n, const double* x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::scalar, "scalar", &gemm_scalar, &axpy_scalar, &sum_scalar};
    return table;
}

}  // namespace sgmil::kernels
