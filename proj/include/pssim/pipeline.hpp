#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pssim/config.hpp"
#include "pssim/datapath.hpp"
#include "pssim/energy.hpp"
#include "pssim/huffman.hpp"
#include "pssim/synth.hpp"
#include "pssim/tensor_io.hpp"

namespace pssim {

struct StreamReport {
    std::uint64_t words = 0;
    std::uint32_t passes = 1; // DMA transfers of this stream per frame
    std::uint64_t raw_bytes = 0;
    std::uint64_t compressed_bytes = 0;

    double ratio() const {
        return compressed_bytes ? double(raw_bytes) / double(compressed_bytes) : 0.0;
    }
};

struct LayerReport {
    std::string name;
    LayerKind kind = LayerKind::conv;
    int weight_bits = 0, image_bits = 0, out_bits = 0;
    double weight_zero_fraction = 0.0, image_zero_fraction = 0.0;
    double voltage = 0.0;
    double required_voltage = 0.0;
    bool voltage_ok = true;
    bool guarding = false;
    SimStats stats;
    PowerBreakdown power;
    StreamReport weight_io, image_io, output_io;

    double mmacs() const { return double(stats.useful_macs) / 1e6; }
};

struct Report {
    std::string network;
    double frequency = 0.0;
    std::vector<LayerReport> layers;

    std::uint64_t total_cycles = 0; // including stalls
    std::uint64_t total_stalls = 0;
    std::uint64_t total_useful_macs = 0;
    double fps = 0.0;
    double mac_efficiency = 0.0;
    double average_power_mw = 0.0;
    double energy_per_frame_mj = 0.0;
    double real_tops_per_watt = 0.0;
    std::uint64_t io_raw_bytes = 0;
    std::uint64_t io_compressed_bytes = 0;
    double io_overall_ratio = 0.0;
};

inline PowerModel default_power_model() { return PowerModel{}; }

namespace pipedetail {

inline std::uint64_t mix_seed(std::uint64_t global, int layer, int role) {
    std::uint64_t x = global * 0x9E3779B97F4A7C15ull + std::uint64_t(layer) * 0xBF58476D1CE4E5B9ull +
                      std::uint64_t(role) + 1;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

inline QTensor materialize(const TensorSource& src, std::vector<std::uint32_t> dims,
                           int bits, int exponent, std::uint64_t fallback_seed,
                           const std::string& where) {
    switch (src.kind) {
    case SourceKind::synthetic:
        return synth_tensor(std::move(dims), bits, src.zero_fraction,
                            src.seed.value_or(fallback_seed), exponent);
    case SourceKind::file: {
        QTensor t = read_qtsr(src.path);
        if (t.dims != dims)
            throw ShapeError(where + ": tensor file dims do not match the layer");
        if (t.bits != bits)
            throw RangeError(where + ": tensor file width does not match the layer");
        return t;
    }
    case SourceKind::chain:
        throw ParseError(where + ": chain source cannot be materialized directly");
    }
    throw ParseError(where + ": bad tensor source");
}

inline StreamReport stream_report(const std::vector<std::int32_t>& words, int bits,
                                  std::uint32_t passes) {
    StreamReport sr;
    sr.words = words.size();
    sr.passes = passes;
    const HuffStream hs = huff_encode(words, bits);
    sr.raw_bytes = packed_raw_bytes(words.size(), bits) * passes;
    sr.compressed_bytes = hs.compressed_bytes() * passes;
    return sr;
}

} // namespace pipedetail

// Simulate a whole network frame: schedule, cycle-level datapath run,
// memory accounting, Huffman IO and the power model, layer by layer.
inline Report run_network(const NetworkConfig& cfg,
                          const PowerModel& model = default_power_model(),
                          std::uint64_t global_seed = 0) {
    Report rep;
    rep.network = cfg.network;
    rep.frequency = cfg.frequency;

    QTensor chain; // output of the previous layer
    bool have_chain = false;
    std::uint64_t issued_slots = 0;

    std::vector<PowerBreakdown> breakdowns;
    std::vector<std::uint64_t> layer_cycles;
    std::vector<std::uint64_t> layer_macs;

    int index = 0;
    for (const auto& lc : cfg.layers) {
        ++index;
        const LayerSpec& s = lc.spec;
        LayerReport lr;
        lr.name = lc.name;
        lr.kind = s.kind;
        try {
            if (s.kind == LayerKind::maxpool) {
                if (!have_chain) throw ParseError("pool layer has no input to chain");
                chain = maxpool(chain, s.kernel_h, s.kernel_w, s.stride_v, s.stride_h);
                rep.layers.push_back(std::move(lr));
                continue;
            }
            if (s.kind == LayerKind::relu) {
                if (!have_chain) throw ParseError("relu layer has no input to chain");
                chain = relu_vec(chain);
                rep.layers.push_back(std::move(lr));
                continue;
            }

            const QTensor weights = pipedetail::materialize(
                lc.weights_src,
                {std::uint32_t(s.num_filters), std::uint32_t(s.in_channels),
                 std::uint32_t(s.kernel_h), std::uint32_t(s.kernel_w)},
                s.weight_bits, s.weight_exponent,
                pipedetail::mix_seed(global_seed, index, 0), lc.name);

            QTensor image;
            if (lc.image_src.kind == SourceKind::chain) {
                if (!have_chain)
                    throw ParseError("layer '" + lc.name + "' chains but no layer precedes it");
                image = chain;
                if (image.bits != s.image_bits)
                    throw RangeError("layer '" + lc.name + "' expects " +
                                     std::to_string(s.image_bits) +
                                     "-bit images but the chain provides " +
                                     std::to_string(int(image.bits)) + "-bit data");
            } else {
                image = pipedetail::materialize(
                    lc.image_src,
                    {std::uint32_t(s.in_channels), std::uint32_t(s.in_height),
                     std::uint32_t(s.in_width)},
                    s.image_bits, s.image_exponent,
                    pipedetail::mix_seed(global_seed, index, 1), lc.name);
            }

            // block roles rotate round-robin per conv layer
            const int base = int(breakdowns.size()) % MemoryConfig::blocks;
            LayerResult run = run_layer(s, weights, image, base,
                                        (base + 1) % MemoryConfig::blocks,
                                        (base + 2) % MemoryConfig::blocks);

            lr.weight_bits = s.weight_bits;
            lr.image_bits = s.image_bits;
            lr.out_bits = s.out_bits;
            lr.weight_zero_fraction = zero_fraction_of(weights);
            lr.image_zero_fraction = zero_fraction_of(image);
            lr.voltage = s.voltage;
            lr.guarding = s.guarding;
            try {
                lr.required_voltage =
                    voltage_for_precision(std::max(s.weight_bits, s.image_bits), s.frequency);
                lr.voltage_ok = s.voltage >= lr.required_voltage - 1e-9;
            } catch (const RangeError&) {
                lr.required_voltage = 0.0;
                lr.voltage_ok = true;
            }

            // DMA streams: weights once, the image once per filter span,
            // the produced output once
            const std::uint32_t image_passes =
                std::uint32_t((s.num_filters + kArrayFilters - 1) / kArrayFilters);
            lr.weight_io = pipedetail::stream_report(weights.data, s.weight_bits, 1);
            lr.image_io = pipedetail::stream_report(image.data, s.image_bits, image_passes);
            lr.output_io = pipedetail::stream_report(run.output.data, s.out_bits, 1);
            run.stats.dma_bytes_raw = lr.weight_io.raw_bytes + lr.image_io.raw_bytes +
                                      lr.output_io.raw_bytes;
            run.stats.dma_bytes_compressed = lr.weight_io.compressed_bytes +
                                             lr.image_io.compressed_bytes +
                                             lr.output_io.compressed_bytes;

            lr.stats = run.stats;
            lr.power = layer_power(run.stats, operating_point(s), model);

            rep.total_cycles += run.stats.cycles + run.stats.stall_cycles;
            rep.total_stalls += run.stats.stall_cycles;
            rep.total_useful_macs += run.stats.useful_macs;
            issued_slots += run.stats.mac_slots_issued;
            rep.io_raw_bytes += run.stats.dma_bytes_raw;
            rep.io_compressed_bytes += run.stats.dma_bytes_compressed;

            breakdowns.push_back(lr.power);
            layer_cycles.push_back(run.stats.cycles + run.stats.stall_cycles);
            layer_macs.push_back(run.stats.useful_macs);

            chain = std::move(run.output);
            have_chain = true;
            rep.layers.push_back(std::move(lr));
        } catch (const std::exception& e) {
            throw SimError("layer " + std::to_string(index) + " ('" + lc.name +
                           "'): " + e.what());
        }
    }

    if (rep.total_cycles > 0) {
        rep.fps = rep.frequency / double(rep.total_cycles);
        rep.mac_efficiency = double(rep.total_useful_macs) / double(issued_slots);
        const FrameEnergy fe =
            energy_per_frame(breakdowns, layer_cycles, rep.frequency, layer_macs);
        rep.average_power_mw = fe.average_power_mw;
        rep.energy_per_frame_mj = fe.total_mj;
        rep.real_tops_per_watt = fe.real_tops_per_watt;
    }
    if (rep.io_compressed_bytes > 0)
        rep.io_overall_ratio = double(rep.io_raw_bytes) / double(rep.io_compressed_bytes);
    return rep;
}

// ---- report serialization ----------------------------------------------

namespace pipedetail {

inline nlohmann::ordered_json stream_json(const StreamReport& sr) {
    return {{"words", sr.words},
            {"passes", sr.passes},
            {"raw_bytes", sr.raw_bytes},
            {"compressed_bytes", sr.compressed_bytes},
            {"ratio", sr.ratio()}};
}

inline StreamReport stream_from_json(const nlohmann::json& j) {
    StreamReport sr;
    sr.words = j.at("words").get<std::uint64_t>();
    sr.passes = j.at("passes").get<std::uint32_t>();
    sr.raw_bytes = j.at("raw_bytes").get<std::uint64_t>();
    sr.compressed_bytes = j.at("compressed_bytes").get<std::uint64_t>();
    return sr;
}

inline const char* kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::relu: return "relu";
    }
    return "?";
}

} // namespace pipedetail

inline nlohmann::ordered_json report_to_json(const Report& rep) {
    nlohmann::ordered_json j;
    j["network"] = rep.network;
    j["frequency_hz"] = rep.frequency;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& lr : rep.layers) {
        nlohmann::ordered_json lj;
        lj["name"] = lr.name;
        lj["kind"] = pipedetail::kind_name(lr.kind);
        if (lr.kind == LayerKind::conv) {
            lj["weight_bits"] = lr.weight_bits;
            lj["image_bits"] = lr.image_bits;
            lj["out_bits"] = lr.out_bits;
            lj["weight_zero_fraction"] = lr.weight_zero_fraction;
            lj["image_zero_fraction"] = lr.image_zero_fraction;
            lj["voltage"] = lr.voltage;
            lj["required_voltage"] = lr.required_voltage;
            lj["voltage_ok"] = lr.voltage_ok;
            lj["guarding"] = lr.guarding;
            lj["mmacs"] = lr.mmacs();
            const SimStats& st = lr.stats;
            lj["counters"] = {{"cycles", st.cycles},
                              {"stall_cycles", st.stall_cycles},
                              {"mac_slots_issued", st.mac_slots_issued},
                              {"macs_active", st.macs_active},
                              {"macs_executed", st.macs_executed},
                              {"macs_guarded", st.macs_guarded},
                              {"useful_macs", st.useful_macs},
                              {"pixel_fetches", st.pixel_fetches},
                              {"weight_fetches", st.weight_fetches},
                              {"pixel_fetches_suppressed", st.pixel_fetches_suppressed},
                              {"weight_fetches_suppressed", st.weight_fetches_suppressed},
                              {"sram_reads", st.sram_reads},
                              {"sram_writes", st.sram_writes},
                              {"flag_bits_read", st.flag_bits_read},
                              {"flag_bits_written", st.flag_bits_written},
                              {"dma_bytes_raw", st.dma_bytes_raw},
                              {"dma_bytes_compressed", st.dma_bytes_compressed}};
            lj["mac_efficiency"] = st.mac_efficiency();
            lj["power_mw"] = {{"leakage", lr.power.leakage_mw},
                              {"fixed", lr.power.fixed_mw},
                              {"sram", lr.power.sram_mw},
                              {"mac_array", lr.power.mac_array_mw},
                              {"total", lr.power.total_mw}};
            lj["real_tops_per_watt"] = lr.power.real_tops_per_watt;
            lj["io"] = {{"weights", pipedetail::stream_json(lr.weight_io)},
                        {"image", pipedetail::stream_json(lr.image_io)},
                        {"output", pipedetail::stream_json(lr.output_io)}};
        }
        j["layers"].push_back(std::move(lj));
    }
    j["totals"] = {{"cycles", rep.total_cycles},
                   {"stall_cycles", rep.total_stalls},
                   {"useful_macs", rep.total_useful_macs},
                   {"fps", rep.fps},
                   {"mac_efficiency", rep.mac_efficiency},
                   {"average_power_mw", rep.average_power_mw},
                   {"energy_per_frame_mj", rep.energy_per_frame_mj},
                   {"real_tops_per_watt", rep.real_tops_per_watt},
                   {"io_raw_bytes", rep.io_raw_bytes},
                   {"io_compressed_bytes", rep.io_compressed_bytes},
                   {"io_overall_ratio", rep.io_overall_ratio}};
    return j;
}

inline Report report_from_json(const nlohmann::json& j) {
    Report rep;
    rep.network = j.at("network").get<std::string>();
    rep.frequency = j.at("frequency_hz").get<double>();
    for (const auto& lj : j.at("layers")) {
        LayerReport lr;
        lr.name = lj.at("name").get<std::string>();
        const std::string kind = lj.at("kind").get<std::string>();
        lr.kind = kind == "conv" ? LayerKind::conv
                : kind == "maxpool" ? LayerKind::maxpool : LayerKind::relu;
        if (lr.kind == LayerKind::conv) {
            lr.weight_bits = lj.at("weight_bits").get<int>();
            lr.image_bits = lj.at("image_bits").get<int>();
            lr.out_bits = lj.at("out_bits").get<int>();
            lr.weight_zero_fraction = lj.at("weight_zero_fraction").get<double>();
            lr.image_zero_fraction = lj.at("image_zero_fraction").get<double>();
            lr.voltage = lj.at("voltage").get<double>();
            lr.required_voltage = lj.at("required_voltage").get<double>();
            lr.voltage_ok = lj.at("voltage_ok").get<bool>();
            lr.guarding = lj.at("guarding").get<bool>();
            const auto& c = lj.at("counters");
            SimStats& st = lr.stats;
            st.cycles = c.at("cycles").get<std::uint64_t>();
            st.stall_cycles = c.at("stall_cycles").get<std::uint64_t>();
            st.mac_slots_issued = c.at("mac_slots_issued").get<std::uint64_t>();
            st.macs_active = c.at("macs_active").get<std::uint64_t>();
            st.macs_executed = c.at("macs_executed").get<std::uint64_t>();
            st.macs_guarded = c.at("macs_guarded").get<std::uint64_t>();
            st.useful_macs = c.at("useful_macs").get<std::uint64_t>();
            st.pixel_fetches = c.at("pixel_fetches").get<std::uint64_t>();
            st.weight_fetches = c.at("weight_fetches").get<std::uint64_t>();
            st.pixel_fetches_suppressed =
                c.at("pixel_fetches_suppressed").get<std::uint64_t>();
            st.weight_fetches_suppressed =
                c.at("weight_fetches_suppressed").get<std::uint64_t>();
            st.sram_reads = c.at("sram_reads").get<std::uint64_t>();
            st.sram_writes = c.at("sram_writes").get<std::uint64_t>();
            st.flag_bits_read = c.at("flag_bits_read").get<std::uint64_t>();
            st.flag_bits_written = c.at("flag_bits_written").get<std::uint64_t>();
            st.dma_bytes_raw = c.at("dma_bytes_raw").get<std::uint64_t>();
            st.dma_bytes_compressed = c.at("dma_bytes_compressed").get<std::uint64_t>();
            const auto& p = lj.at("power_mw");
            lr.power.leakage_mw = p.at("leakage").get<double>();
            lr.power.fixed_mw = p.at("fixed").get<double>();
            lr.power.sram_mw = p.at("sram").get<double>();
            lr.power.mac_array_mw = p.at("mac_array").get<double>();
            lr.power.total_mw = p.at("total").get<double>();
            lr.power.real_tops_per_watt = lj.at("real_tops_per_watt").get<double>();
            lr.weight_io = pipedetail::stream_from_json(lj.at("io").at("weights"));
            lr.image_io = pipedetail::stream_from_json(lj.at("io").at("image"));
            lr.output_io = pipedetail::stream_from_json(lj.at("io").at("output"));
        }
        rep.layers.push_back(std::move(lr));
    }
    const auto& t = j.at("totals");
    rep.total_cycles = t.at("cycles").get<std::uint64_t>();
    rep.total_stalls = t.at("stall_cycles").get<std::uint64_t>();
    rep.total_useful_macs = t.at("useful_macs").get<std::uint64_t>();
    rep.fps = t.at("fps").get<double>();
    rep.mac_efficiency = t.at("mac_efficiency").get<double>();
    rep.average_power_mw = t.at("average_power_mw").get<double>();
    rep.energy_per_frame_mj = t.at("energy_per_frame_mj").get<double>();
    rep.real_tops_per_watt = t.at("real_tops_per_watt").get<double>();
    rep.io_raw_bytes = t.at("io_raw_bytes").get<std::uint64_t>();
    rep.io_compressed_bytes = t.at("io_compressed_bytes").get<std::uint64_t>();
    rep.io_overall_ratio = t.at("io_overall_ratio").get<double>();
    return rep;
}

inline std::string emit_report_machine(const Report& rep) {
    return report_to_json(rep).dump(2) + "\n";
}

inline std::string emit_report_human(const Report& rep) {
    std::ostringstream os;
    os << "Network: " << rep.network << "  @ "
       << std::fixed << std::setprecision(0) << rep.frequency / 1e6 << " MHz\n\n";
    os << std::left << std::setw(10) << "Layer" << std::right
       << std::setw(16) << "Filt/Img bits" << std::setw(14) << "BW Reduc."
       << std::setw(18) << "IO/HuffIO (MB)" << std::setw(9) << "V"
       << std::setw(12) << "MMACs" << std::setw(11) << "Power(mW)"
       << std::setw(12) << "Real TOPS/W" << "\n";
    for (const auto& lr : rep.layers) {
        if (lr.kind != LayerKind::conv) {
            os << std::left << std::setw(10) << lr.name << std::right
               << std::setw(16) << pipedetail::kind_name(lr.kind) << "\n";
            continue;
        }
        std::ostringstream bits;
        bits << lr.weight_bits << " (" << std::fixed << std::setprecision(0)
             << lr.weight_zero_fraction * 100 << "%) / " << lr.image_bits << " ("
             << lr.image_zero_fraction * 100 << "%)";
        std::ostringstream bw;
        bw << std::fixed << std::setprecision(2) << lr.weight_io.ratio() << "x/"
           << lr.image_io.ratio() << "x";
        const double raw_mb = double(lr.stats.dma_bytes_raw) / 1e6;
        const double huff_mb = double(lr.stats.dma_bytes_compressed) / 1e6;
        std::ostringstream io;
        io << std::fixed << std::setprecision(3) << raw_mb << " / " << huff_mb;
        os << std::left << std::setw(10) << lr.name << std::right
           << std::setw(16) << bits.str() << std::setw(14) << bw.str()
           << std::setw(18) << io.str()
           << std::setw(9) << std::setprecision(2) << lr.voltage
           << std::setw(12) << std::setprecision(1) << lr.mmacs()
           << std::setw(11) << std::setprecision(1) << lr.power.total_mw
           << std::setw(12) << std::setprecision(2) << lr.power.real_tops_per_watt
           << "\n";
    }
    os << "\nTotals: " << std::setprecision(3)
       << double(rep.io_raw_bytes) / 1e6 << " / "
       << double(rep.io_compressed_bytes) / 1e6 << " MB IO ("
       << std::setprecision(2) << rep.io_overall_ratio << "x), avg "
       << std::setprecision(1) << rep.average_power_mw << " mW, "
       << std::setprecision(2) << rep.real_tops_per_watt << " real TOPS/W\n";
    os << "Frame: " << rep.total_cycles << " cycles ("
       << rep.total_stalls << " stalls), " << std::setprecision(1) << rep.fps
       << " fps, MAC efficiency " << std::setprecision(1)
       << rep.mac_efficiency * 100 << "%\n";
    return os.str();
}

// ---- power model serialization -----------------------------------------

inline nlohmann::ordered_json power_model_to_json(const PowerModel& m) {
    return {{"p_leak_mw", m.p_leak_mw},
            {"c_fixed_mw_per_mhz", m.c_fixed},
            {"c_sram_mw_per_mhz", m.c_sram},
            {"c_mac_mw_per_mhz", m.c_mac},
            {"activity_slope", m.activity_slope},
            {"guard_sram_share", m.guard_sram_share},
            {"guard_mac_share", m.guard_mac_share}};
}

inline PowerModel power_model_from_json(const nlohmann::json& j) {
    PowerModel m;
    m.p_leak_mw = j.value("p_leak_mw", kLeakageMw);
    m.c_fixed = j.at("c_fixed_mw_per_mhz").get<double>();
    m.c_sram = j.at("c_sram_mw_per_mhz").get<double>();
    m.c_mac = j.at("c_mac_mw_per_mhz").get<double>();
    m.activity_slope = j.value("activity_slope", 1.0);
    m.guard_sram_share = j.at("guard_sram_share").get<double>();
    m.guard_mac_share = j.at("guard_mac_share").get<double>();
    return m;
}

} // namespace pssim
