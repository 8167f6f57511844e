#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pssim/energy.hpp"
#include "pssim/errors.hpp"
#include "pssim/layer.hpp"

namespace pssim {

enum class SourceKind { synthetic, file, chain };

struct TensorSource {
    SourceKind kind = SourceKind::synthetic;
    double zero_fraction = 0.0;
    std::optional<std::uint64_t> seed;
    std::string path;
};

struct LayerConfig {
    std::string name;
    LayerSpec spec;
    TensorSource weights_src;
    TensorSource image_src;
    bool voltage_explicit = false;
};

struct NetworkConfig {
    std::string network;
    double frequency = kMaxFrequency;
    std::vector<LayerConfig> layers;
};

namespace configdetail {

inline int bits_for_magnitude(std::uint64_t m) {
    int b = 0;
    while ((std::uint64_t(1) << b) < m) ++b;
    return b;
}

// Right shift that keeps the worst-case accumulation inside the output
// width, so layers without an explicit output exponent never saturate.
inline int default_out_exponent(const LayerSpec& s) {
    const std::uint64_t terms =
        std::uint64_t(s.in_channels) * s.kernel_h * s.kernel_w;
    const int acc_bits =
        configdetail::bits_for_magnitude(terms) + (s.weight_bits - 1) + (s.image_bits - 1);
    const int shift = std::max(0, acc_bits - (s.out_bits - 1));
    return s.weight_exponent + s.image_exponent + shift;
}

inline TensorSource parse_source(const nlohmann::json& j, const std::string& where) {
    TensorSource src;
    const std::string kind = j.value("source", "synthetic");
    if (kind == "synthetic") {
        src.kind = SourceKind::synthetic;
        src.zero_fraction = j.value("zero_fraction", 0.0);
        if (src.zero_fraction < 0.0 || src.zero_fraction > 1.0)
            throw ParseError(where + ": zero_fraction out of [0,1]");
        if (j.contains("seed")) src.seed = j.at("seed").get<std::uint64_t>();
    } else if (kind == "file") {
        src.kind = SourceKind::file;
        if (!j.contains("path")) throw ParseError(where + ": file source needs a path");
        src.path = j.at("path").get<std::string>();
    } else if (kind == "chain") {
        src.kind = SourceKind::chain;
    } else {
        throw ParseError(where + ": unknown tensor source '" + kind + "'");
    }
    return src;
}

} // namespace configdetail

inline NetworkConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }

    NetworkConfig cfg;
    try {
        cfg.network = j.value("network", "unnamed");
        cfg.frequency = j.value("frequency_hz", kMaxFrequency);
        if (cfg.frequency <= 0) throw ParseError("frequency_hz must be positive");
        if (!j.contains("layers") || !j.at("layers").is_array())
            throw ParseError("config needs a 'layers' array");

        int index = 0;
        for (const auto& lj : j.at("layers")) {
            ++index;
            LayerConfig lc;
            lc.name = lj.value("name", "layer" + std::to_string(index));
            const std::string where = "layer '" + lc.name + "'";
            const std::string kind = lj.value("kind", "conv");
            LayerSpec& s = lc.spec;
            if (kind == "conv")
                s.kind = LayerKind::conv;
            else if (kind == "maxpool")
                s.kind = LayerKind::maxpool;
            else if (kind == "relu")
                s.kind = LayerKind::relu;
            else
                throw ParseError(where + ": unknown kind '" + kind + "'");

            s.in_channels = lj.value("in_channels", 0);
            s.in_height = lj.value("in_height", 0);
            s.in_width = lj.value("in_width", 0);
            s.frequency = cfg.frequency;
            if (s.kind == LayerKind::conv) {
                s.num_filters = lj.value("filters", 0);
                s.kernel_h = lj.value("kernel_h", lj.value("kernel", 0));
                s.kernel_w = lj.value("kernel_w", lj.value("kernel", 0));
                s.stride_h = lj.value("stride_h", lj.value("stride", 1));
                s.stride_v = lj.value("stride_v", lj.value("stride", 1));
                s.weight_bits = lj.value("weight_bits", 16);
                s.image_bits = lj.value("image_bits", 16);
                s.weight_exponent = lj.value("weight_exponent", 0);
                s.image_exponent = lj.value("image_exponent", 0);
                s.out_bits = lj.value("out_bits", s.image_bits);
                s.guarding = lj.value("guarding", false);
                if (lj.contains("voltage")) {
                    s.voltage = lj.at("voltage").get<double>();
                    lc.voltage_explicit = true;
                }
                s.out_exponent = lj.contains("out_exponent")
                                     ? lj.at("out_exponent").get<int>()
                                     : configdetail::default_out_exponent(s);
                lc.weights_src = lj.contains("weights")
                                     ? configdetail::parse_source(lj.at("weights"), where)
                                     : TensorSource{};
                lc.image_src = lj.contains("image")
                                   ? configdetail::parse_source(lj.at("image"), where)
                                   : TensorSource{SourceKind::chain, 0.0, {}, {}};
            } else {
                s.kernel_h = lj.value("window_h", lj.value("window", 0));
                s.kernel_w = lj.value("window_w", lj.value("window", 0));
                s.stride_h = lj.value("stride_h", lj.value("stride", s.kernel_w));
                s.stride_v = lj.value("stride_v", lj.value("stride", s.kernel_h));
                lc.image_src = TensorSource{SourceKind::chain, 0.0, {}, {}};
            }
            cfg.layers.push_back(std::move(lc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad config field: ") + e.what());
    }

    // chain the declared shapes through the network
    int prev_c = 0, prev_h = 0, prev_w = 0;
    std::string prev_name;
    bool have_prev = false;
    for (auto& lc : cfg.layers) {
        LayerSpec& s = lc.spec;
        const bool chained = lc.image_src.kind == SourceKind::chain;
        if (chained && !have_prev)
            throw ParseError("layer '" + lc.name + "' chains but no layer precedes it");
        if (chained && have_prev) {
            if (s.in_channels == 0 && s.in_height == 0 && s.in_width == 0) {
                s.in_channels = prev_c;
                s.in_height = prev_h;
                s.in_width = prev_w;
            } else if (s.in_channels != prev_c || s.in_height != prev_h ||
                       s.in_width != prev_w) {
                std::ostringstream msg;
                msg << "layer '" << lc.name << "' declares input "
                    << s.in_channels << "x" << s.in_height << "x" << s.in_width
                    << " but layer '" << prev_name << "' produces " << prev_c
                    << "x" << prev_h << "x" << prev_w;
                throw ShapeChainError(msg.str());
            }
        }
        validate(s);
        switch (s.kind) {
        case LayerKind::conv:
            prev_c = s.num_filters;
            prev_h = s.out_height();
            prev_w = s.out_width();
            break;
        case LayerKind::maxpool:
            prev_c = s.in_channels;
            prev_h = (s.in_height - s.kernel_h) / s.stride_v + 1;
            prev_w = (s.in_width - s.kernel_w) / s.stride_h + 1;
            break;
        case LayerKind::relu:
            prev_c = s.in_channels;
            prev_h = s.in_height;
            prev_w = s.in_width;
            break;
        }
        prev_name = lc.name;
        have_prev = true;
    }
    return cfg;
}

inline NetworkConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

} // namespace pssim
