#pragma once

#include <cstddef>
#include <cstdlib>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

namespace oscflat {

/// Cache-line / widest-SIMD-register alignment for all hot arrays.
inline constexpr std::size_t kAlign = 64;

/// Doubles per 64-byte vector register; component arrays are padded to a
/// multiple of this so vectorized loops never run a scalar tail.
inline constexpr int kSimdDoubles = 8;

constexpr int padded_len(int n) {
    return (n + kSimdDoubles - 1) / kSimdDoubles * kSimdDoubles;
}

/// Beam species. Even indices are particles, odd are antiparticles;
/// the first pair is the e flavor, the second the x flavor.
enum class Species : int { NuE = 0, NuEBar = 1, NuX = 2, NuXBar = 3 };

inline constexpr int kSpeciesCount = 4;

constexpr bool is_antiparticle(Species s) { return (static_cast<int>(s) & 1) != 0; }
constexpr bool is_e_flavor(Species s) { return static_cast<int>(s) < 2; }

inline const char* species_name(Species s) {
    switch (s) {
        case Species::NuE: return "NuE";
        case Species::NuEBar: return "NuEBar";
        case Species::NuX: return "NuX";
        case Species::NuXBar: return "NuXBar";
    }
    return "?";
}

/// Error categories; the CLI maps these onto distinct exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Aligned allocator that default-initializes (no zero fill), so the first
/// write to an array happens in whichever worker touches it first.
template <typename T, std::size_t Align = kAlign>
struct AlignedAllocator {
    using value_type = T;

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n == 0) return nullptr;
        void* p = ::operator new(n * sizeof(T), std::align_val_t(Align));
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(Align));
    }

    template <typename U>
    void construct(U* p) noexcept(noexcept(::new (static_cast<void*>(p)) U)) {
        ::new (static_cast<void*>(p)) U;  // default-init, not value-init
    }
    template <typename U, typename... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(static_cast<Args&&>(args)...);
    }

    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };

    friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

}  // namespace oscflat
