#pragma once

// Calibration anchor files: measured layer powers tied to bundled network
// configs, plus the optional four-step gain chain for one layer. Running
// the referenced configs yields the stats each anchor attaches to.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pssim/energy.hpp"
#include "pssim/pipeline.hpp"

namespace pssim {

struct AnchorRow {
    std::string config_path;
    std::string layer_name;
    double measured_mw = 0.0;
    double weight = 1.0;
    bool exact = false;
};

struct ChainAnchorSpec {
    std::string config_path;
    std::string layer_name;
    double base_mw = 0.0;
    double precision_gain = 1.0;
    double voltage_gain = 1.0;
    double guard_gain = 1.0;
    double weight = 1.0;
};

struct AnchorSet {
    std::vector<AnchorRow> rows;
    std::optional<ChainAnchorSpec> chain;
};

inline AnchorSet parse_anchors(const std::string& text, const std::string& base_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("anchors file is not valid JSON: ") + e.what());
    }
    const auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        if (fp.is_absolute() || base_dir.empty()) return p;
        return (std::filesystem::path(base_dir) / fp).string();
    };
    AnchorSet set;
    try {
        for (const auto& a : j.at("anchors")) {
            AnchorRow row;
            row.config_path = resolve(a.at("config").get<std::string>());
            row.layer_name = a.at("layer").get<std::string>();
            row.measured_mw = a.at("measured_mw").get<double>();
            row.weight = a.value("weight", 1.0);
            row.exact = a.value("exact", false);
            set.rows.push_back(std::move(row));
        }
        if (j.contains("precision_chain")) {
            const auto& c = j.at("precision_chain");
            ChainAnchorSpec ch;
            ch.config_path = resolve(c.at("config").get<std::string>());
            ch.layer_name = c.at("layer").get<std::string>();
            ch.base_mw = c.at("base_mw").get<double>();
            const auto& r = c.at("ratios");
            ch.precision_gain = r.at(0).get<double>();
            ch.voltage_gain = r.at(1).get<double>();
            ch.guard_gain = r.at(2).get<double>();
            ch.weight = c.value("weight", 1.0);
            set.chain = ch;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad anchors field: ") + e.what());
    }
    return set;
}

inline AnchorSet load_anchors(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open anchors file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_anchors(ss.str(), std::filesystem::path(path).parent_path().string());
}

// Simulated stats and operating point for one anchor layer.
struct AnchorContext {
    SimStats stats;
    OperatingPoint op;
};

class AnchorRunner {
public:
    explicit AnchorRunner(std::uint64_t seed = 0) : seed_(seed) {}

    AnchorContext context(const std::string& config_path, const std::string& layer) {
        const Report& rep = report_for(config_path);
        for (const auto& lr : rep.layers) {
            if (lr.name != layer) continue;
            if (lr.kind != LayerKind::conv)
                throw ParseError("anchor layer '" + layer + "' is not a conv layer");
            AnchorContext ctx;
            ctx.stats = lr.stats;
            ctx.op = OperatingPoint{std::max(lr.weight_bits, lr.image_bits),
                                    lr.voltage, rep.frequency};
            return ctx;
        }
        throw ParseError("anchor layer '" + layer + "' not found in " + config_path);
    }

    const Report& report_for(const std::string& config_path) {
        auto it = cache_.find(config_path);
        if (it == cache_.end()) {
            const NetworkConfig cfg = load_config(config_path);
            // power values in the cached report use the default model; only
            // stats and operating points feed the calibration
            it = cache_.emplace(config_path, run_network(cfg, default_power_model(), seed_)).first;
        }
        return it->second;
    }

private:
    std::uint64_t seed_;
    std::map<std::string, Report> cache_;
};

// Expand an anchor set into calibration anchors, running each referenced
// config once. The chain becomes three unguarded pseudo-anchors derived
// from the guarded layer's measured power and the published gain ratios.
inline std::vector<CalibrationAnchor> build_calibration_anchors(const AnchorSet& set,
                                                                AnchorRunner& runner) {
    std::vector<CalibrationAnchor> anchors;
    for (const auto& row : set.rows) {
        const AnchorContext ctx = runner.context(row.config_path, row.layer_name);
        anchors.push_back({ctx.stats, ctx.op, row.measured_mw, row.weight, row.exact});
    }
    if (set.chain) {
        const ChainAnchorSpec& ch = *set.chain;
        const AnchorContext ctx = runner.context(ch.config_path, ch.layer_name);
        const SimStats plain = strip_guarding(ctx.stats);
        const double voltage_mw = ch.base_mw * ch.guard_gain;
        const double precision_mw = voltage_mw * ch.voltage_gain;
        const double full_mw = precision_mw * ch.precision_gain;
        anchors.push_back({plain, ctx.op, voltage_mw, ch.weight, false});
        anchors.push_back({plain,
                           OperatingPoint{ctx.op.bits_effective, kNominalVoltage,
                                          ctx.op.frequency},
                           precision_mw, ch.weight, false});
        anchors.push_back({plain,
                           OperatingPoint{16, kNominalVoltage, ctx.op.frequency},
                           full_mw, ch.weight, false});
    }
    return anchors;
}

} // namespace pssim
