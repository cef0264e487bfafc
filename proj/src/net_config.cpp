#include "tdd/net.hpp"

#include <json.hpp>

namespace tdd {

std::string attention_name(Attention a) { return a == Attention::GAM ? "GAM" : "LAM"; }

Attention attention_from_name(const std::string& name) {
    if (name == "GAM") return Attention::GAM;
    if (name == "LAM") return Attention::LAM;
    throw ArgumentError("argument error: unknown attention tag \"" + name + "\" (expected LAM or GAM)");
}

void NetworkConfig::validate() const {
    if (in_bands < 1) throw ArgumentError("argument error: in_bands must be >= 1");
    for (const int c : encoder_channels)
        if (c < 1) throw ArgumentError("argument error: encoder channels must be >= 1");
    if (spatial_factors[0] < 1) throw ArgumentError("argument error: spatial factors must be >= 1");
    for (std::size_t i = 1; i < spatial_factors.size(); ++i) {
        if (spatial_factors[i] < spatial_factors[i - 1] || spatial_factors[i] % spatial_factors[i - 1] != 0)
            throw ArgumentError("argument error: spatial factors must be nondecreasing with integer ratios");
    }
    for (const int d : dilations)
        if (d < 1) throw ArgumentError("argument error: dilations must be >= 1");
    if (heads < 1) throw ArgumentError("argument error: heads must be >= 1");
    for (int block = 1; block <= 5; ++block)
        if (decoder_channels(block) % heads != 0)
            throw ArgumentError("argument error: heads " + std::to_string(heads) +
                                " must divide decoder channel width " + std::to_string(decoder_channels(block)));
    if (lam_window[0] < 1 || lam_window[1] < 1 || lam_window[0] % 2 == 0 || lam_window[1] % 2 == 0)
        throw ArgumentError("argument error: lam_window sides must be odd positive");
    for (const double w : loss_weights)
        if (w <= 0.0) throw ArgumentError("argument error: loss_weights must be > 0");
}

std::string NetworkConfig::to_json_string() const {
    nlohmann::ordered_json j;
    j["in_bands"] = in_bands;
    j["encoder_channels"] = encoder_channels;
    j["spatial_factors"] = spatial_factors;
    j["dilations"] = dilations;
    j["heads"] = heads;
    j["lam_window"] = lam_window;
    std::vector<std::string> order;
    for (const auto a : attention_order) order.push_back(attention_name(a));
    j["attention_order"] = order;
    j["loss_weights"] = loss_weights;
    return j.dump();
}

NetworkConfig NetworkConfig::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("format error: network config is not valid JSON (") + e.what() + ")");
    }
    NetworkConfig cfg;
    try {
        if (j.contains("in_bands")) cfg.in_bands = j.at("in_bands").get<int>();
        if (j.contains("encoder_channels")) cfg.encoder_channels = j.at("encoder_channels").get<std::array<int, 6>>();
        if (j.contains("spatial_factors")) cfg.spatial_factors = j.at("spatial_factors").get<std::array<int, 6>>();
        if (j.contains("dilations")) cfg.dilations = j.at("dilations").get<std::array<int, 6>>();
        if (j.contains("heads")) cfg.heads = j.at("heads").get<int>();
        if (j.contains("lam_window")) cfg.lam_window = j.at("lam_window").get<std::array<int, 2>>();
        if (j.contains("attention_order")) {
            const auto tags = j.at("attention_order").get<std::array<std::string, 5>>();
            for (std::size_t i = 0; i < tags.size(); ++i) cfg.attention_order[i] = attention_from_name(tags[i]);
        }
        if (j.contains("loss_weights")) cfg.loss_weights = j.at("loss_weights").get<std::array<double, 6>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("format error: bad network config field (") + e.what() + ")");
    }
    return cfg;
}

} // namespace tdd
