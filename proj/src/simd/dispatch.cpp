#include "vstain/simd/kernels.hpp"

#include "vstain/errors.hpp"

#include <cstdlib>
#include <string>

namespace vstain::simd {

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(VSTAIN_HAVE_AVX2)
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_supported(isa))
        fail(ErrorKind::invalid_state, "kernel table '" + std::string(to_string(isa)) + "' not supported on this CPU");
#if defined(VSTAIN_HAVE_AVX2)
    if (isa == Isa::avx2) return detail::avx2_table;
#endif
    return detail::scalar_table;
}

namespace {

const KernelTable& select() {
    if (const char* env = std::getenv("VSTAIN_SIMD"); env && std::string(env) == "scalar")
        return detail::scalar_table;
    if (isa_supported(Isa::avx2)) return table(Isa::avx2);
    return detail::scalar_table;
}

} // namespace

const KernelTable& active() {
    static const KernelTable& chosen = select();
    return chosen;
}

} // namespace vstain::simd
