// pssim: batch driver for the precision-scalable 2D-SIMD CNN accelerator
// simulator. Subcommands: simulate, calibrate, encode, decode, selftest.

#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pssim/calib.hpp"
#include "pssim/config.hpp"
#include "pssim/datapath.hpp"
#include "pssim/huffman.hpp"
#include "pssim/oracle.hpp"
#include "pssim/pipeline.hpp"
#include "pssim/synth.hpp"
#include "pssim/tensor_io.hpp"

namespace {

struct Override {
    int layer = 0;
    int a = 0, b = 0;
    double v = 0.0;
};

Override parse_bits_override(const std::string& text) {
    Override o;
    if (std::sscanf(text.c_str(), "%d:%d,%d", &o.layer, &o.a, &o.b) != 3)
        throw CLI::ValidationError("--bits-override expects L:w,i");
    return o;
}

Override parse_voltage_override(const std::string& text) {
    Override o;
    if (std::sscanf(text.c_str(), "%d:%lf", &o.layer, &o.v) != 2)
        throw CLI::ValidationError("--voltage-override expects L:v");
    return o;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path);
    if (!os) throw pssim::IoError("cannot open for write: " + path);
    os << text;
}

int run_simulate(const std::string& config_path, double frequency,
                 const std::string& guarding, const std::vector<std::string>& bits_ov,
                 const std::vector<std::string>& volt_ov, std::uint64_t seed,
                 const std::string& format, const std::string& out,
                 const std::string& model_path) {
    pssim::NetworkConfig cfg = pssim::load_config(config_path);
    if (frequency > 0) {
        cfg.frequency = frequency;
        for (auto& lc : cfg.layers) lc.spec.frequency = frequency;
    }
    if (guarding == "on" || guarding == "off") {
        for (auto& lc : cfg.layers) lc.spec.guarding = (guarding == "on");
    }
    for (const auto& text : bits_ov) {
        const Override o = parse_bits_override(text);
        if (o.layer < 1 || o.layer > int(cfg.layers.size()))
            throw pssim::ParseError("--bits-override layer index out of range");
        auto& s = cfg.layers[o.layer - 1].spec;
        s.weight_bits = o.a;
        s.image_bits = o.b;
        pssim::validate(s);
    }
    for (const auto& text : volt_ov) {
        const Override o = parse_voltage_override(text);
        if (o.layer < 1 || o.layer > int(cfg.layers.size()))
            throw pssim::ParseError("--voltage-override layer index out of range");
        cfg.layers[o.layer - 1].spec.voltage = o.v;
    }

    pssim::PowerModel model = pssim::default_power_model();
    if (!model_path.empty()) {
        std::ifstream is(model_path);
        if (!is) throw pssim::IoError("cannot open power model: " + model_path);
        model = pssim::power_model_from_json(nlohmann::json::parse(is));
    }

    const pssim::Report rep = pssim::run_network(cfg, model, seed);
    write_text(out, format == "machine" ? pssim::emit_report_machine(rep)
                                        : pssim::emit_report_human(rep));
    return 0;
}

int run_calibrate(const std::string& anchors_path, std::uint64_t seed,
                  const std::string& format, const std::string& out) {
    const pssim::AnchorSet set = pssim::load_anchors(anchors_path);
    pssim::AnchorRunner runner(seed);
    const auto anchors = pssim::build_calibration_anchors(set, runner);
    const pssim::CalibrationResult res = pssim::calibrate(anchors);

    nlohmann::ordered_json j;
    j["model"] = pssim::power_model_to_json(res.model);
    j["rms_rel_error"] = res.rms_rel_error;
    j["anchor_rel_errors"] = res.rel_errors;
    if (format == "machine") {
        write_text(out, j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << "Fitted power model:\n"
           << "  p_leak       " << res.model.p_leak_mw << " mW\n"
           << "  c_fixed      " << res.model.c_fixed << " mW/MHz\n"
           << "  c_sram       " << res.model.c_sram << " mW/MHz @ reference rate\n"
           << "  c_mac        " << res.model.c_mac << " mW/MHz @ 16b, 1.1V\n"
           << "  guard shares sram " << res.model.guard_sram_share << ", mac "
           << res.model.guard_mac_share << "\n"
           << "  rms relative error " << res.rms_rel_error * 100 << "%\n";
        os << "  per-anchor error %:";
        for (double e : res.rel_errors) os << " " << e * 100;
        os << "\n";
        write_text(out, os.str());
    }
    return 0;
}

int run_encode(const std::string& in, const std::string& out) {
    const pssim::QTensor t = pssim::read_qtsr(in);
    const pssim::HuffStream hs = pssim::huff_encode(t.data, t.bits);
    pssim::write_huf(out, hs);
    std::cerr << "encoded " << t.data.size() << " words (" << int(t.bits)
              << "-bit): " << pssim::packed_raw_bytes(t.data.size(), t.bits)
              << " -> " << hs.compressed_bytes() << " bytes\n";
    return 0;
}

int run_decode(const std::string& in, const std::string& out) {
    const pssim::HuffStream hs = pssim::read_huf(in);
    const std::vector<std::int32_t> words = pssim::huff_decode(hs);
    pssim::QTensor t;
    t.dims = {std::uint32_t(words.size())};
    t.bits = hs.bits;
    t.exponent = 0;
    t.data = words;
    pssim::write_qtsr(out, t);
    std::cerr << "decoded " << words.size() << " words\n";
    return 0;
}

// Randomized oracle-equivalence and guarding-transparency suite.
int run_selftest(int cases, std::uint64_t seed) {
    using namespace pssim;
    std::mt19937_64 rng(seed);
    static const int kbits[] = {1, 2, 4, 7, 8, 9, 16};
    static const int kernels[] = {1, 3, 5, 11};
    static const int strides[] = {1, 2, 4};
    int failures = 0;
    for (int it = 0; it < cases; ++it) {
        LayerSpec sp;
        sp.kind = LayerKind::conv;
        const int k = kernels[rng() % 4];
        sp.kernel_h = sp.kernel_w = k;
        sp.stride_h = strides[rng() % 3];
        sp.stride_v = strides[rng() % 3];
        sp.in_channels = 1 + int(rng() % 3);
        sp.num_filters = 1 + int(rng() % 24);
        sp.in_height = std::min<int>(32, k + int(rng() % 12));
        sp.in_width = std::min<int>(32, k + int(rng() % 28));
        sp.weight_bits = kbits[rng() % 7];
        sp.image_bits = kbits[rng() % 7];
        sp.out_bits = 8;
        sp.out_exponent = int(rng() % 6);
        const QTensor weights = synth_tensor(
            {std::uint32_t(sp.num_filters), std::uint32_t(sp.in_channels),
             std::uint32_t(k), std::uint32_t(k)},
            sp.weight_bits, 0.25, rng());
        const QTensor image = synth_tensor(
            {std::uint32_t(sp.in_channels), std::uint32_t(sp.in_height),
             std::uint32_t(sp.in_width)},
            sp.image_bits, 0.5, rng());

        sp.guarding = false;
        const LayerResult off = run_layer(sp, weights, image);
        sp.guarding = true;
        const LayerResult on = run_layer(sp, weights, image);
        const QTensor ref = oracle::reference_conv(sp, weights, image);
        if (off.output.data != ref.data || on.output.data != ref.data) {
            std::cerr << "mismatch at case " << it << "\n";
            ++failures;
        }
        if (on.stats.macs_executed + on.stats.macs_guarded != on.stats.macs_active)
            ++failures;
    }
    std::cout << (failures ? "FAIL" : "OK") << ": " << cases - failures << "/"
              << cases << " randomized layers match the reference convolution\n";
    return failures ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cycle-level simulator for a precision-scalable 2D-SIMD CNN accelerator"};
    app.require_subcommand(1);

    std::string config_path, anchors_path, in_path, out_path;
    std::string format = "human", guarding = "config", out = "", model_path = "";
    double frequency = 0;
    std::uint64_t seed = 0;
    int cases = 200;
    std::vector<std::string> bits_ov, volt_ov;

    auto* sim = app.add_subcommand("simulate", "simulate a network config");
    sim->add_option("config", config_path, "network config file")->required();
    sim->add_option("--frequency", frequency, "clock in Hz (overrides the config)");
    sim->add_option("--guarding", guarding, "on|off (overrides the config)")
        ->check(CLI::IsMember({"on", "off", "config"}));
    sim->add_option("--bits-override", bits_ov, "L:w,i per-layer bit widths");
    sim->add_option("--voltage-override", volt_ov, "L:v per-layer supply");
    sim->add_option("--seed", seed, "synthetic data seed");
    sim->add_option("--format", format, "human|machine")
        ->check(CLI::IsMember({"human", "machine"}));
    sim->add_option("--out", out, "output path (default stdout)");
    sim->add_option("--power-model", model_path, "fitted power model JSON");

    auto* cal = app.add_subcommand("calibrate", "fit the power model to anchors");
    cal->add_option("anchors", anchors_path, "anchors JSON file")->required();
    cal->add_option("--seed", seed, "synthetic data seed");
    cal->add_option("--format", format, "human|machine")
        ->check(CLI::IsMember({"human", "machine"}));
    cal->add_option("--out", out, "output path (default stdout)");

    auto* enc = app.add_subcommand("encode", "Huffman-encode a QTSR tensor");
    enc->add_option("input", in_path, "QTSR tensor file")->required();
    enc->add_option("output", out_path, "HUF1 stream file")->required();

    auto* dec = app.add_subcommand("decode", "decode a HUF1 stream to QTSR");
    dec->add_option("input", in_path, "HUF1 stream file")->required();
    dec->add_option("output", out_path, "QTSR tensor file (flat)")->required();

    auto* self = app.add_subcommand("selftest", "randomized oracle-equivalence suite");
    self->add_option("--cases", cases, "number of randomized layers");
    self->add_option("--seed", seed, "rng seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return run_simulate(config_path, frequency, guarding, bits_ov, volt_ov,
                                seed, format, out, model_path);
        if (cal->parsed()) return run_calibrate(anchors_path, seed, format, out);
        if (enc->parsed()) return run_encode(in_path, out_path);
        if (dec->parsed()) return run_decode(in_path, out_path);
        if (self->parsed()) return run_selftest(cases, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
