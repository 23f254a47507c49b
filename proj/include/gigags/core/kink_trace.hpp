#pragma once

#include <cstdint>

namespace gigags {

/// A running digest of the outcomes of non-differentiable branches (signs,
/// clamps, cell indices, orderings). Two evaluations with equal traces lie on
/// the same smooth piece of the objective.
struct KinkTrace {
    std::uint64_t hash = 0x9e3779b97f4a7c15ull;
    std::uint64_t events = 0;

    void note(std::int64_t v) noexcept {
        std::uint64_t z = hash ^ (std::uint64_t(v) + 0x9e3779b97f4a7c15ull + (hash << 6) + (hash >> 2));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        hash = z ^ (z >> 31);
        ++events;
    }

    friend bool operator==(const KinkTrace &, const KinkTrace &) = default;
};

namespace detail {
inline thread_local KinkTrace *active_kink_trace = nullptr;
}

/// The trace recording on this thread, or null.
inline KinkTrace *
active_kink_trace() noexcept {
    return detail::active_kink_trace;
}

inline void
note_kink(std::int64_t v) noexcept {
    if (KinkTrace *t = detail::active_kink_trace)
        t->note(v);
}

/// Routes kink events on this thread into `trace` for the scope's lifetime.
class KinkTraceScope {
public:
    explicit KinkTraceScope(KinkTrace &trace) noexcept : prev_(detail::active_kink_trace) {
        detail::active_kink_trace = &trace;
    }
    ~KinkTraceScope() { detail::active_kink_trace = prev_; }
    KinkTraceScope(const KinkTraceScope &) = delete;
    KinkTraceScope &operator=(const KinkTraceScope &) = delete;

private:
    KinkTrace *prev_;
};

} // namespace gigags
