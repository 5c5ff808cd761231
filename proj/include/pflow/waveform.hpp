#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "pflow/types.hpp"

namespace pflow {

/// Default sampling density for one fundamental period. Divisible by four so
/// a quarter-period delay is an exact sample shift.
inline constexpr std::size_t kSamplesPerPeriod = 4096;

/// Floor on samples per period; below this, peak quantization error would
/// compete with the tolerances the oracle is asked to certify.
inline constexpr std::size_t kMinSamplesPerPeriod = 2048;

/// One period of a three-phase quantity, sampled uniformly. Sample n sits at
/// t = n / (size() * fundamental_frequency) seconds.
struct Waveform {
    std::array<std::vector<double>, 3> samples;  ///< indexed by Phase
    double fundamental_frequency = 60.0;         ///< Hz

    [[nodiscard]] std::size_t size() const { return samples[0].size(); }
};

/// Time-domain reconstruction of a phasor set over one period:
///   x_p(t_n) = |X_p| * cos(2*pi*n/N + arg X_p).
/// Phasor magnitudes are on the peak-consistent per-unit base, so no
/// sqrt(2) enters: a phasor of magnitude m peaks at exactly m. This pins the
/// convention the device current rating uses: i_rating compares directly
/// against phasor-combination magnitudes. Throws std::invalid_argument below
/// kMinSamplesPerPeriod.
[[nodiscard]] Waveform synthesize(const PhasorSet& phasors,
                                  std::size_t sample_count = kSamplesPerPeriod);

/// Per-phase maximum instantaneous magnitude over the period. The discrete
/// argmax is refined by a three-point parabolic fit (periodic wrap-around),
/// which recovers sinusoid peaks far below the sampling error.
[[nodiscard]] std::array<double, 3> measure_peaks(const Waveform& waveform);

struct PowerMeasurement {
    std::array<double, 3> p{};  ///< per-phase active power, indexed by Phase
    std::array<double, 3> q{};  ///< per-phase reactive power

    [[nodiscard]] double p_total() const { return p[0] + p[1] + p[2]; }
    [[nodiscard]] double q_total() const { return q[0] + q[1] + q[2]; }
};

/// Per-phase powers from sampled voltage and current. The raw time averages
/// are doubled to land on the phasor-scale convention P = Re(V * conj(I)),
/// matching the peak-consistent base used throughout (both waveforms carry
/// peak amplitudes, so <v*i> = P/2). Reactive power uses a quarter-period
/// voltage delay; sample counts must match and be divisible by four.
[[nodiscard]] PowerMeasurement measure_power(const Waveform& voltage, const Waveform& current);

/// Writes "time,ia,ib,ic" rows with %.12g formatting; time in seconds from
/// the fundamental frequency.
void write_csv(std::ostream& out, const Waveform& waveform);

}  // namespace pflow
