#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pssim/errors.hpp"
#include "pssim/layer.hpp"
#include "pssim/stats.hpp"

namespace pssim {

inline constexpr double kNominalVoltage = 1.1;
inline constexpr double kVoltageFloor = 0.55;
inline constexpr double kMinFrequency = 12e6;
inline constexpr double kMaxFrequency = 204e6;
inline constexpr double kLeakageMw = 0.7;
inline constexpr int kRefAccessesPerCycle = 32; // 16 pixels + 16 weights

struct OperatingPoint {
    int bits_effective = 16; // max(weight_bits, image_bits)
    double voltage = kNominalVoltage;
    double frequency = kMaxFrequency;
};

inline OperatingPoint operating_point(const LayerSpec& spec) {
    return OperatingPoint{std::max(spec.weight_bits, spec.image_bits),
                          spec.voltage, spec.frequency};
}

// Minimum scalable-domain supply for a precision at a frequency.
// Anchor grid at 204 MHz: 16b -> 1.1V, 8b -> 0.9V, 4b -> 0.8V, 1b -> 0.8V,
// piecewise linear in bits, scaled linearly with frequency toward the
// 0.55V floor.
inline double voltage_for_precision(int bits, double frequency) {
    if (bits < 1 || bits > 16)
        throw RangeError("voltage_for_precision: bits out of [1,16]");
    if (frequency < kMinFrequency || frequency > kMaxFrequency)
        throw RangeError("voltage_for_precision: frequency out of [12,204] MHz");
    double v204;
    if (bits <= 4)
        v204 = 0.8;
    else if (bits <= 8)
        v204 = 0.8 + 0.1 * (bits - 4) / 4.0;
    else
        v204 = 0.9 + 0.2 * (bits - 8) / 8.0;
    const double v = kVoltageFloor + (v204 - kVoltageFloor) * (frequency / kMaxFrequency);
    return std::clamp(v, kVoltageFloor, kNominalVoltage);
}

// Calibrated coefficients. The fixed domain (control, ReLU/pool units,
// clocking, DMA and the Huffman engine) is frequency proportional; the
// SRAM term scales with the achieved access rate; the MAC-array term
// scales with precision activity, supply squared and slot occupancy.
// Guard shares are the fractions of the SRAM/MAC terms that a suppressed
// access or guarded MAC actually saves.
//
// Defaults are the least-squares fit over the bundled measurement anchors
// (configs/anchors.json); `pssim calibrate` reproduces them. The fit
// drives c_fixed to zero: the measured totals attribute all non-MAC
// dynamic power to the access-rate term.
struct PowerModel {
    double p_leak_mw = kLeakageMw;
    double c_fixed = 0.0;                  // mW per MHz
    double c_sram = 0.21850256672403126;   // mW per MHz at the reference access rate
    double c_mac = 1.5237540805527956;     // mW per MHz, full array, 16 bits, 1.1V
    double activity_slope = 1.0;           // linear bits scaling
    double guard_sram_share = 1.0;
    double guard_mac_share = 0.54;
};

struct PowerBreakdown {
    double leakage_mw = 0.0;
    double fixed_mw = 0.0;
    double sram_mw = 0.0;
    double mac_array_mw = 0.0;
    double total_mw = 0.0;
    double real_tops_per_watt = 0.0;
};

namespace energydetail {

// SRAM activity relative to the 32-accesses/cycle reference pattern.
inline double sram_activity(const SimStats& st, double guard_sram_share) {
    const double cycles = static_cast<double>(st.cycles + st.stall_cycles);
    if (cycles == 0.0) return 0.0;
    const double charged = static_cast<double>(st.pixel_fetches + st.weight_fetches);
    const double suppressed = static_cast<double>(st.pixel_fetches_suppressed +
                                                  st.weight_fetches_suppressed);
    const double flag_words =
        static_cast<double>(st.flag_bits_read + st.flag_bits_written) / 16.0;
    const double accesses = charged - guard_sram_share * suppressed +
                            static_cast<double>(st.sram_writes) + flag_words;
    return accesses / (kRefAccessesPerCycle * cycles);
}

// MAC-array slot occupancy; guarded slots keep (1 - share) of their cost.
inline double mac_occupancy(const SimStats& st, double guard_mac_share) {
    const double cycles = static_cast<double>(st.cycles + st.stall_cycles);
    if (cycles == 0.0) return 0.0;
    const double active = static_cast<double>(st.macs_executed) +
                          (1.0 - guard_mac_share) * static_cast<double>(st.macs_guarded);
    return active / (256.0 * cycles);
}

} // namespace energydetail

inline PowerBreakdown layer_power(const SimStats& stats, const OperatingPoint& op,
                                  const PowerModel& model) {
    PowerBreakdown b;
    const double f_mhz = op.frequency / 1e6;
    b.leakage_mw = model.p_leak_mw;
    b.fixed_mw = f_mhz * model.c_fixed;
    b.sram_mw = f_mhz * model.c_sram *
                energydetail::sram_activity(stats, model.guard_sram_share);
    const double activity =
        std::pow(op.bits_effective / 16.0, model.activity_slope);
    const double vratio = op.voltage / kNominalVoltage;
    b.mac_array_mw = f_mhz * model.c_mac * activity * vratio * vratio *
                     energydetail::mac_occupancy(stats, model.guard_mac_share);
    b.total_mw = b.leakage_mw + b.fixed_mw + b.sram_mw + b.mac_array_mw;

    const double cycles = static_cast<double>(stats.cycles + stats.stall_cycles);
    if (op.frequency > 0.0 && cycles > 0.0 && b.total_mw > 0.0) {
        // real TOPS counts 2 ops per dense useful MAC
        const double ops_per_s =
            2.0 * static_cast<double>(stats.useful_macs) * op.frequency / cycles;
        b.real_tops_per_watt = ops_per_s / (b.total_mw * 1e-3) / 1e12;
    }
    return b;
}

inline double peak_performance_gops(double frequency) {
    if (frequency < kMinFrequency || frequency > kMaxFrequency)
        throw RangeError("peak_performance: frequency out of [12,204] MHz");
    return 2.0 * 256.0 * frequency / 1e9;
}

struct CalibrationAnchor {
    SimStats stats;
    OperatingPoint op;
    double measured_mw = 0.0;
    double weight = 1.0;
    bool exact = false; // fit is constrained through this point
};

struct CalibrationResult {
    PowerModel model;
    std::vector<double> rel_errors; // per anchor, in input order
    double rms_rel_error = 0.0;
};

namespace energydetail {

struct LinearTerms {
    double u = 0.0; // multiplies c_fixed
    double v = 0.0; // multiplies c_sram
    double w = 0.0; // multiplies c_mac
};

inline LinearTerms terms_for(const CalibrationAnchor& a, double gm, double gs,
                             double slope) {
    LinearTerms t;
    const double f_mhz = a.op.frequency / 1e6;
    t.u = f_mhz;
    t.v = f_mhz * sram_activity(a.stats, gs);
    const double activity = std::pow(a.op.bits_effective / 16.0, slope);
    const double vr = a.op.voltage / kNominalVoltage;
    t.w = f_mhz * activity * vr * vr * mac_occupancy(a.stats, gm);
    return t;
}

// Weighted least squares of relative error over (c_fixed, c_sram) with
// c_mac eliminated through the exact anchor; coefficients clamped to >= 0.
struct InnerFit {
    double c_fixed = 0.0, c_sram = 0.0, c_mac = 0.0;
    double objective = 0.0;
    bool feasible = false;
};

inline InnerFit solve_linear(const std::vector<CalibrationAnchor>& anchors,
                             const std::vector<LinearTerms>& terms, int exact_idx,
                             double leak) {
    // eliminate c_mac via the exact anchor when present
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
    const bool has_exact = exact_idx >= 0;
    if (has_exact) {
        const auto& te = terms[exact_idx];
        if (te.w <= 0.0) return {};
        alpha = (anchors[exact_idx].measured_mw - leak) / te.w;
        beta = te.u / te.w;
        gamma = te.v / te.w;
    }

    // assemble weighted normal equations for the free coefficients
    // unknowns: x = (c_fixed, c_sram [, c_mac when no exact anchor])
    const int nx = has_exact ? 2 : 3;
    double ata[3][3] = {};
    double atb[3] = {};
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        if (static_cast<int>(i) == exact_idx) continue;
        const double meas = anchors[i].measured_mw;
        if (meas <= 0.0) continue;
        const double wgt = anchors[i].weight / (meas * meas);
        double row[3];
        double base = leak;
        if (has_exact) {
            row[0] = terms[i].u - beta * terms[i].w;
            row[1] = terms[i].v - gamma * terms[i].w;
            row[2] = 0.0;
            base += alpha * terms[i].w;
        } else {
            row[0] = terms[i].u;
            row[1] = terms[i].v;
            row[2] = terms[i].w;
        }
        const double target = meas - base;
        for (int r = 0; r < nx; ++r) {
            atb[r] += wgt * row[r] * target;
            for (int c = 0; c < nx; ++c) ata[r][c] += wgt * row[r] * row[c];
        }
    }

    // solve with active-set clamping: try all sign patterns of fixing
    // coefficients at zero and keep the best feasible solution
    InnerFit best;
    best.objective = 1e300;
    for (int mask = 0; mask < (1 << nx); ++mask) {
        double m[3][3] = {};
        double b[3] = {};
        for (int r = 0; r < nx; ++r) {
            if (mask & (1 << r)) {
                m[r][r] = 1.0;
                b[r] = 0.0;
            } else {
                for (int c = 0; c < nx; ++c) m[r][c] = ata[r][c];
                b[r] = atb[r];
                for (int c = 0; c < nx; ++c)
                    if (mask & (1 << c)) m[r][c] = (r == c) ? 1.0 : 0.0;
            }
        }
        // gaussian elimination, 3x3 max
        double aug[3][4];
        for (int r = 0; r < nx; ++r) {
            for (int c = 0; c < nx; ++c) aug[r][c] = m[r][c];
            aug[r][nx] = b[r];
        }
        bool singular = false;
        for (int col = 0; col < nx && !singular; ++col) {
            int piv = col;
            for (int r = col + 1; r < nx; ++r)
                if (std::fabs(aug[r][col]) > std::fabs(aug[piv][col])) piv = r;
            if (std::fabs(aug[piv][col]) < 1e-12) {
                singular = true;
                break;
            }
            if (piv != col)
                for (int c = 0; c <= nx; ++c) std::swap(aug[piv][c], aug[col][c]);
            for (int r = 0; r < nx; ++r) {
                if (r == col) continue;
                const double k = aug[r][col] / aug[col][col];
                for (int c = 0; c <= nx; ++c) aug[r][c] -= k * aug[col][c];
            }
        }
        if (singular) continue;
        double x[3] = {0, 0, 0};
        for (int r = 0; r < nx; ++r) x[r] = aug[r][nx] / aug[r][r];
        bool ok = true;
        for (int r = 0; r < nx; ++r)
            if (x[r] < 0.0) ok = false;
        if (!ok) continue;

        InnerFit fit;
        fit.c_fixed = x[0];
        fit.c_sram = x[1];
        fit.c_mac = has_exact ? alpha - beta * x[0] - gamma * x[1] : x[2];
        if (fit.c_mac < 0.0) continue;

        // objective: weighted squared relative error over all anchors
        double obj = 0.0;
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            if (static_cast<int>(i) == exact_idx) continue;
            const double meas = anchors[i].measured_mw;
            if (meas <= 0.0) continue;
            const double pred = leak + fit.c_fixed * terms[i].u +
                                fit.c_sram * terms[i].v + fit.c_mac * terms[i].w;
            const double rel = (pred - meas) / meas;
            obj += anchors[i].weight * rel * rel;
        }
        if (obj < best.objective) {
            best = fit;
            best.objective = obj;
            best.feasible = true;
        }
    }
    return best;
}

} // namespace energydetail

// Least-squares fit of the model coefficients over measured anchors.
// p_leak stays pinned at 0.7 mW and the activity slope stays linear; an
// anchor marked exact constrains the fit through its measured power.
inline CalibrationResult calibrate(const std::vector<CalibrationAnchor>& anchors) {
    if (anchors.size() < 4)
        throw FitError("calibrate: need at least 4 anchors spanning precision, "
                       "voltage and guarding");
    int exact_idx = -1;
    for (std::size_t i = 0; i < anchors.size(); ++i)
        if (anchors[i].exact) {
            if (exact_idx >= 0) throw FitError("calibrate: multiple exact anchors");
            exact_idx = static_cast<int>(i);
        }

    PowerModel best_model;
    double best_obj = 1e300;
    bool found = false;
    std::vector<energydetail::LinearTerms> terms(anchors.size());
    for (int gmi = 0; gmi <= 100; gmi += 2) {
        const double gm = gmi / 100.0;
        for (int gsi = 0; gsi <= 100; gsi += 5) {
            const double gs = gsi / 100.0;
            for (std::size_t i = 0; i < anchors.size(); ++i)
                terms[i] = energydetail::terms_for(anchors[i], gm, gs, 1.0);
            const auto fit =
                energydetail::solve_linear(anchors, terms, exact_idx, kLeakageMw);
            if (!fit.feasible) continue;
            if (fit.objective < best_obj) {
                best_obj = fit.objective;
                best_model = PowerModel{kLeakageMw, fit.c_fixed, fit.c_sram,
                                        fit.c_mac, 1.0, gs, gm};
                found = true;
            }
        }
    }
    if (!found) throw FitError("calibrate: no feasible coefficients");

    CalibrationResult res;
    res.model = best_model;
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& a : anchors) {
        const PowerBreakdown b = layer_power(a.stats, a.op, best_model);
        const double rel = (b.total_mw - a.measured_mw) / a.measured_mw;
        res.rel_errors.push_back(rel);
        sq += rel * rel;
        ++n;
    }
    res.rms_rel_error = std::sqrt(sq / static_cast<double>(n));
    if (res.rms_rel_error > 0.25)
        throw FitError("calibrate: residual RMS relative error " +
                       std::to_string(res.rms_rel_error) + " exceeds 25%");
    return res;
}

// Same geometry with guard accounting removed: what the run would have
// cost without zero-skipping.
inline SimStats strip_guarding(SimStats s) {
    s.macs_executed = s.macs_active;
    s.macs_guarded = 0;
    s.pixel_fetches_suppressed = 0;
    s.weight_fetches_suppressed = 0;
    s.flag_bits_read = 0;
    s.flag_bits_written = 0;
    s.sram_reads = s.pixel_fetches + s.weight_fetches;
    return s;
}

// The four-step evaluation of one layer's energy saving mechanisms:
// full precision at nominal supply, precision scaling, voltage scaling,
// then guarding.
struct ChainEval {
    double full_mw = 0.0;      // 16b, 1.1V, unguarded
    double precision_mw = 0.0; // layer bits, 1.1V, unguarded
    double voltage_mw = 0.0;   // layer bits, layer V, unguarded
    double guarded_mw = 0.0;   // layer bits, layer V, guarded
    double precision_gain = 0.0;
    double voltage_gain = 0.0;
    double guard_gain = 0.0;
};

inline ChainEval evaluate_chain(const SimStats& guarded_stats,
                                const OperatingPoint& op, const PowerModel& model) {
    const SimStats plain = strip_guarding(guarded_stats);
    ChainEval ce;
    ce.full_mw = layer_power(plain, {16, kNominalVoltage, op.frequency}, model).total_mw;
    ce.precision_mw =
        layer_power(plain, {op.bits_effective, kNominalVoltage, op.frequency}, model).total_mw;
    ce.voltage_mw = layer_power(plain, op, model).total_mw;
    ce.guarded_mw = layer_power(guarded_stats, op, model).total_mw;
    ce.precision_gain = ce.full_mw / ce.precision_mw;
    ce.voltage_gain = ce.precision_mw / ce.voltage_mw;
    ce.guard_gain = ce.voltage_mw / ce.guarded_mw;
    return ce;
}

struct FrameEnergy {
    std::vector<double> per_layer_mj;
    double total_mj = 0.0;
    double total_seconds = 0.0;
    double average_power_mw = 0.0;
    double real_tops_per_watt = 0.0;
};

// Per-layer energy at a common clock; average power weights each layer by
// its share of the frame time.
inline FrameEnergy energy_per_frame(const std::vector<PowerBreakdown>& breakdowns,
                                    const std::vector<std::uint64_t>& cycles,
                                    double frequency,
                                    const std::vector<std::uint64_t>& useful_macs = {}) {
    if (breakdowns.size() != cycles.size())
        throw RangeError("energy_per_frame: layer count mismatch");
    if (frequency <= 0.0)
        throw RangeError("energy_per_frame: frequency must be positive");
    FrameEnergy fe;
    std::uint64_t total_cycles = 0;
    for (std::size_t i = 0; i < breakdowns.size(); ++i) {
        const double seconds = static_cast<double>(cycles[i]) / frequency;
        fe.per_layer_mj.push_back(breakdowns[i].total_mw * seconds);
        fe.total_mj += breakdowns[i].total_mw * seconds;
        total_cycles += cycles[i];
    }
    fe.total_seconds = static_cast<double>(total_cycles) / frequency;
    fe.average_power_mw = fe.total_seconds > 0.0 ? fe.total_mj / fe.total_seconds : 0.0;
    if (!useful_macs.empty() && fe.total_mj > 0.0) {
        double ops = 0.0;
        for (auto m : useful_macs) ops += 2.0 * static_cast<double>(m);
        fe.real_tops_per_watt =
            (ops / fe.total_seconds) / (fe.average_power_mw * 1e-3) / 1e12;
    }
    return fe;
}

} // namespace pssim
