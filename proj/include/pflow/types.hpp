#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace pflow {

using Complex = std::complex<double>;

/// The three phases of the system. Every per-phase quantity is indexed by this.
enum class Phase : int { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};

[[nodiscard]] constexpr int phase_index(Phase p) { return static_cast<int>(p); }

[[nodiscard]] constexpr char phase_letter(Phase p) {
    constexpr std::array<char, 3> names{'a', 'b', 'c'};
    return names[static_cast<std::size_t>(phase_index(p))];
}

/// Subset of phases present at a bus or terminal.
class PhaseMask {
  public:
    constexpr PhaseMask() = default;

    [[nodiscard]] static constexpr PhaseMask all() { return PhaseMask{0b111}; }
    [[nodiscard]] static constexpr PhaseMask none() { return PhaseMask{0}; }

    [[nodiscard]] constexpr bool contains(Phase p) const {
        return (bits_ & (1u << phase_index(p))) != 0;
    }
    [[nodiscard]] constexpr PhaseMask with(Phase p) const {
        return PhaseMask{static_cast<std::uint8_t>(bits_ | (1u << phase_index(p)))};
    }
    [[nodiscard]] constexpr int count() const {
        int n = 0;
        for (Phase p : kAllPhases) n += contains(p) ? 1 : 0;
        return n;
    }
    [[nodiscard]] constexpr bool operator==(const PhaseMask&) const = default;

  private:
    explicit constexpr PhaseMask(std::uint8_t bits) : bits_(bits) {}
    std::uint8_t bits_ = 0;
};

/// Per-phase complex values (voltages or currents) in rectangular form.
struct PhasorSet {
    std::array<Complex, 3> v{};

    [[nodiscard]] Complex& operator[](Phase p) { return v[static_cast<std::size_t>(phase_index(p))]; }
    [[nodiscard]] const Complex& operator[](Phase p) const {
        return v[static_cast<std::size_t>(phase_index(p))];
    }
    [[nodiscard]] Complex& a() { return v[0]; }
    [[nodiscard]] Complex& b() { return v[1]; }
    [[nodiscard]] Complex& c() { return v[2]; }
    [[nodiscard]] const Complex& a() const { return v[0]; }
    [[nodiscard]] const Complex& b() const { return v[1]; }
    [[nodiscard]] const Complex& c() const { return v[2]; }
};

/// Zero/positive/negative symmetrical components of a PhasorSet.
struct SequenceSet {
    Complex zero{};
    Complex positive{};
    Complex negative{};
};

[[nodiscard]] inline bool is_finite(double x) { return std::isfinite(x); }
[[nodiscard]] inline bool is_finite(Complex z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}
[[nodiscard]] inline bool is_finite(const PhasorSet& p) {
    return is_finite(p.a()) && is_finite(p.b()) && is_finite(p.c());
}

}  // namespace pflow
