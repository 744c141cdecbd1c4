#include <atomic>
#include <cstdlib>

#include "procsight/kernels.hpp"

namespace procsight::kernels {

namespace {

bool cpu_supports(Isa isa) {
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable* initial_table() {
    if (const char* env = std::getenv("PROCSIGHT_KERNELS")) {
        Isa forced;
        if (parse_isa(env, forced))
            if (const KernelTable* t = table_for(forced)) return t;
    }
    const auto isas = available_isas();
    return table_for(isas.back());
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

} // namespace

const KernelTable* table_for(Isa isa) {
    if (!cpu_supports(isa)) return nullptr;
    switch (isa) {
    case Isa::scalar: return &scalar_table();
    case Isa::avx2: return detail::avx2_table();
    case Isa::neon: return detail::neon_table();
    }
    return nullptr;
}

std::vector<Isa> available_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
        if (table_for(isa)) out.push_back(isa);
    return out;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) {
    const KernelTable* t = table_for(isa);
    if (!t) return false;
    current().store(t, std::memory_order_release);
    return true;
}

const char* to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    }
    return "?";
}

bool parse_isa(std::string_view text, Isa& out) noexcept {
    if (text == "scalar") out = Isa::scalar;
    else if (text == "avx2") out = Isa::avx2;
    else if (text == "neon") out = Isa::neon;
    else return false;
    return true;
}

} // namespace procsight::kernels
