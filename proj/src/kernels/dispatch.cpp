#include <cstdlib>
#include <stdexcept>
#include <string>

#include "leafnet/kernels.hpp"

namespace leafnet::kernels {
namespace {

bool cpu_supports(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(LEAFNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            __builtin_cpu_init();
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(LEAFNET_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* compiled_table(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return &detail::scalar_table;
        case Isa::avx2:
#if defined(LEAFNET_HAVE_AVX2)
            return &detail::avx2_table;
#else
            return nullptr;
#endif
        case Isa::neon:
#if defined(LEAFNET_HAVE_NEON)
            return &detail::neon_table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable& select() {
    if (const char* forced = std::getenv("LEAFNET_ISA")) {
        const std::string name(forced);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
            if (name == isa_name(isa)) return table(isa);
        }
        throw std::runtime_error("LEAFNET_ISA=" + name + " is not a known instruction set");
    }
    for (Isa isa : {Isa::avx2, Isa::neon}) {
        if (compiled_table(isa) && cpu_supports(isa)) return *compiled_table(isa);
    }
    return detail::scalar_table;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

const KernelTable& table(Isa isa) {
    const KernelTable* t = compiled_table(isa);
    if (!t || !cpu_supports(isa)) {
        throw std::runtime_error("instruction set " + std::string(isa_name(isa)) +
                                 " is not available on this machine");
    }
    return *t;
}

const KernelTable& active() {
    static const KernelTable& chosen = select();
    return chosen;
}

std::vector<Isa> available_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
        if (compiled_table(isa) && cpu_supports(isa)) out.push_back(isa);
    }
    return out;
}

}  // namespace leafnet::kernels
