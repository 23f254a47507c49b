#include "gigags/simd/kernels.hpp"

#include <cstdlib>
#include <string>

namespace gigags::simd {

std::string_view
to_string(Isa isa) {
    switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
    }
    return "unknown";
}

bool
isa_available(Isa isa) {
    switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
        return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2") &&
               __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Isa::Neon: return detail::neon_table() != nullptr;
    }
    return false;
}

const KernelTable &
kernels(Isa isa) {
    if (!isa_available(isa))
        return detail::scalar_table;
    switch (isa) {
    case Isa::Avx2: return *detail::avx2_table();
    case Isa::Neon: return *detail::neon_table();
    default: return detail::scalar_table;
    }
}

namespace {

const KernelTable &
select_best() {
    if (const char *env = std::getenv("GIGAGS_SIMD"); env && std::string(env) == "scalar")
        return detail::scalar_table;
    if (isa_available(Isa::Avx2))
        return kernels(Isa::Avx2);
    if (isa_available(Isa::Neon))
        return kernels(Isa::Neon);
    return detail::scalar_table;
}

} // namespace

const KernelTable &
kernels() {
    static const KernelTable &best = select_best();
    return best;
}

} // namespace gigags::simd
