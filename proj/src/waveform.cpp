#include "pflow/waveform.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace pflow {

Waveform synthesize(const PhasorSet& phasors, std::size_t sample_count) {
    if (sample_count < kMinSamplesPerPeriod) {
        throw std::invalid_argument("synthesize needs at least 2048 samples per period");
    }
    Waveform waveform;
    for (const Phase phase : kAllPhases) {
        const double magnitude = std::abs(phasors[phase]);
        const double angle = std::arg(phasors[phase]);
        std::vector<double>& out = waveform.samples[static_cast<std::size_t>(phase_index(phase))];
        out.resize(sample_count);
        for (std::size_t n = 0; n < sample_count; ++n) {
            const double theta =
                2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(sample_count);
            out[n] = magnitude * std::cos(theta + angle);
        }
    }
    return waveform;
}

std::array<double, 3> measure_peaks(const Waveform& waveform) {
    std::array<double, 3> peaks{};
    const std::size_t n = waveform.size();
    if (n == 0) {
        return peaks;
    }
    for (std::size_t p = 0; p < 3; ++p) {
        const std::vector<double>& x = waveform.samples[p];
        std::size_t best = 0;
        double best_mag = std::abs(x[0]);
        for (std::size_t i = 1; i < n; ++i) {
            const double mag = std::abs(x[i]);
            if (mag > best_mag) {
                best_mag = mag;
                best = i;
            }
        }
        double refined = best_mag;
        if (n >= 3) {
            // Periodic three-point parabola through the discrete maximum.
            const double ym = std::abs(x[(best + n - 1) % n]);
            const double y0 = best_mag;
            const double yp = std::abs(x[(best + 1) % n]);
            const double curvature = ym - 2.0 * y0 + yp;
            if (curvature < 0.0) {
                const double slope = ym - yp;
                refined = y0 - slope * slope / (8.0 * curvature);
            }
        }
        peaks[p] = refined;
    }
    return peaks;
}

PowerMeasurement measure_power(const Waveform& voltage, const Waveform& current) {
    const std::size_t n = voltage.size();
    if (n == 0 || n != current.size() || n % 4 != 0) {
        throw std::invalid_argument(
            "measure_power needs equal sample counts divisible by four");
    }
    for (std::size_t p = 0; p < 3; ++p) {
        if (voltage.samples[p].size() != n || current.samples[p].size() != n) {
            throw std::invalid_argument("measure_power: ragged waveform");
        }
    }
    const std::size_t quarter = n / 4;
    PowerMeasurement result;
    for (std::size_t p = 0; p < 3; ++p) {
        const std::vector<double>& v = voltage.samples[p];
        const std::vector<double>& i = current.samples[p];
        double acc_p = 0.0;
        double acc_q = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc_p += v[k] * i[k];
            acc_q += v[(k + n - quarter) % n] * i[k];
        }
        // Both signals carry peak amplitudes, so the raw averages are half of
        // the phasor-scale powers.
        result.p[p] = 2.0 * acc_p / static_cast<double>(n);
        result.q[p] = 2.0 * acc_q / static_cast<double>(n);
    }
    return result;
}

void write_csv(std::ostream& out, const Waveform& waveform) {
    out << "time,ia,ib,ic\n";
    const std::size_t n = waveform.size();
    const double period = 1.0 / waveform.fundamental_frequency;
    char buffer[64];
    for (std::size_t k = 0; k < n; ++k) {
        std::snprintf(buffer, sizeof(buffer), "%.12g",
                      period * static_cast<double>(k) / static_cast<double>(n));
        out << buffer;
        for (std::size_t p = 0; p < 3; ++p) {
            std::snprintf(buffer, sizeof(buffer), ",%.12g", waveform.samples[p][k]);
            out << buffer;
        }
        out << '\n';
    }
}

}  // namespace pflow
