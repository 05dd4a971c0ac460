#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sgmil/kernels/kernels.hpp"

using namespace sgmil::kernels;

namespace {

// Textbook triple loop used as the oracle for every kernel table.
void naive_gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const std::vector<double>& a,
                std::size_t lda, const std::vector<double>& b, std::size_t ldb, double beta, std::vector<double>& c,
                std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ta == Trans::yes ? a[p * lda + i] : a[i * lda + p];
                const double bv = tb == Trans::yes ? b[j * ldb + p] : b[p * ldb + j];
                acc += av * bv;
            }
            c[i * ldc + j] = acc + (beta == 0.0 ? 0.0 : beta * c[i * ldc + j]);
        }
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("every available kernel table matches the naive gemm oracle") {
    std::mt19937_64 rng(11);
    for (const KernelTable* table : available_kernels()) {
        CAPTURE(table->name);
        for (int trial = 0; trial < 200; ++trial) {
            std::uniform_int_distribution<std::size_t> dim(1, trial < 150 ? 19 : 300);
            const std::size_t m = dim(rng), n = dim(rng), k = dim(rng);
            const Trans ta = rng() & 1 ? Trans::yes : Trans::no, tb = rng() & 1 ? Trans::yes : Trans::no;
            const std::size_t lda = (ta == Trans::yes ? m : k) + rng() % 3;
            const std::size_t ldb = (tb == Trans::yes ? k : n) + rng() % 3;
            const std::size_t ldc = n + rng() % 3;
            const auto a = random_vec(rng, (ta == Trans::yes ? k : m) * lda);
            const auto b = random_vec(rng, (tb == Trans::yes ? n : k) * ldb);
            const double beta = trial % 3 == 0 ? 0.0 : (trial % 3 == 1 ? 1.0 : -0.5);
            auto c_ref = random_vec(rng, m * ldc);
            auto c = c_ref;
            if (beta == 0.0)
                for (auto& x : c) x = std::nan("");  // C must not be read when beta == 0
            naive_gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c_ref, ldc);
            table->gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, beta, c.data(), ldc);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    REQUIRE(c[i * ldc + j] == doctest::Approx(c_ref[i * ldc + j]).epsilon(1e-12).scale(static_cast<double>(k)));
        }
    }
}

TEST_CASE("axpy and sum agree across kernel tables") {
    std::mt19937_64 rng(5);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 31u, 1000u}) {
        const auto x = random_vec(rng, n);
        const auto y0 = random_vec(rng, n);
        const auto& ref = scalar_kernels();
        auto y_ref = y0;
        ref.axpy(n, 0.75, x.data(), y_ref.data());
        const double s_ref = ref.sum(n, x.data());
        for (const KernelTable* table : available_kernels()) {
            auto y = y0;
            table->axpy(n, 0.75, x.data(), y.data());
            for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-15));
            CHECK(table->sum(n, x.data()) == doctest::Approx(s_ref).epsilon(1e-12));
        }
    }
}

TEST_CASE("dispatch selects a supported table and honours explicit selection") {
    const auto before = active().isa;
    select(Isa::scalar);
    CHECK(active().isa == Isa::scalar);
    if (avx2_kernels() != nullptr && cpu_supports_avx2_fma()) {
        select(Isa::avx2);
        CHECK(active().isa == Isa::avx2);
    }
    select(before);
    CHECK(active().isa == before);
}

}
