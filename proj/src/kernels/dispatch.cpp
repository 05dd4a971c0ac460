#include <cstdlib>
#include <string>
#include <string_view>

#include "sgmil/errors.hpp"
#include "sgmil/kernels/kernels.hpp"

namespace sgmil::kernels {

#if defined(SGMIL_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif
#if defined(SGMIL_HAVE_AVX512)
const KernelTable& avx512_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(SGMIL_HAVE_AVX2)
    return &avx2_kernel_table();
#else
    return nullptr;
#endif
}

const KernelTable* avx512_kernels() {
#if defined(SGMIL_HAVE_AVX512)
    return &avx512_kernel_table();
#else
    return nullptr;
#endif
}

bool cpu_supports_avx512() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx512f") && cpu_supports_avx2_fma();
#else
    return false;
#endif
}

bool cpu_supports_avx2_fma() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::vector<const KernelTable*> available_kernels() {
    std::vector<const KernelTable*> out{&scalar_kernels()};
    if (const KernelTable* t = avx2_kernels(); t != nullptr && cpu_supports_avx2_fma())
        out.push_back(t);
    if (const KernelTable* t = avx512_kernels(); t != nullptr && cpu_supports_avx512())
        out.push_back(t);
    return out;
}

namespace {

const KernelTable* resolve(Isa isa) {
    for (const KernelTable* t : available_kernels())
        if (t->isa == isa) return t;
    return nullptr;
}

const KernelTable* initial_choice() {
    if (const char* env = std::getenv("SGMIL_ISA"); env != nullptr) {
        const std::string_view want(env);
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2") {
            if (const KernelTable* t = resolve(Isa::avx2)) return t;
            throw ConfigError("SGMIL_ISA=avx2 requested but the AVX2 kernels are unavailable");
        }
        if (want == "avx512") {
            if (const KernelTable* t = resolve(Isa::avx512)) return t;
            throw ConfigError("SGMIL_ISA=avx512 requested but the AVX-512 kernels are unavailable");
        }
        throw ConfigError("unknown SGMIL_ISA value '" + std::string(want) + "'");
    }
    return available_kernels().back();
}

const KernelTable*& current() {
    static const KernelTable* table = initial_choice();
    return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

void select(Isa isa) {
    const KernelTable* t = resolve(isa);
    if (t == nullptr) throw ConfigError("requested kernel variant is not available on this machine");
    current() = t;
}

}  // namespace sgmil::kernels
