#pragma once

// Predictor checkpoints.
//
//   "SBCK", u32 LE version, u32 LE header length, UTF-8 JSON header
//   (config, layer shapes, training metadata, standardizer statistics),
//   then every parameter as a float64 LE: per layer, weights row-major
//   (in x out) followed by the bias.

#include "saber/belief_net.hpp"
#include "saber/error.hpp"
#include "saber/feature_io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <fstream>
#include <string>

namespace saber {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string side; // "pk" or "ck"
    BeliefNet net;
    TrainConfig train_config;
    nlohmann::json meta = nlohmann::json::object();
};

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    ck.net.validate();
    const auto& net = ck.net;
    const auto& tc = ck.train_config;
    nlohmann::json h;
    h["format"] = "saber-checkpoint";
    h["side"] = ck.side;
    h["net"] = {{"input_dim", net.config.input_dim},
                {"hidden_dims", net.config.hidden_dims},
                {"dropout_rate", net.config.dropout_rate},
                {"seed", net.config.seed}};
    h["train"] = {{"lr", tc.lr},           {"weight_decay", tc.weight_decay}, {"beta1", tc.beta1},
                  {"beta2", tc.beta2},     {"eps_opt", tc.eps_opt},           {"batch_size", tc.batch_size},
                  {"max_epochs", tc.max_epochs}, {"patience", tc.patience}};
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& L : net.layers) shapes.push_back({L.in, L.out});
    h["layers"] = shapes;
    h["parameter_count"] = net.parameter_count();
    nlohmann::json meta = {{"epochs_run", net.meta.epochs_run},
                           {"best_epoch", net.meta.best_epoch},
                           {"early_stopped", net.meta.early_stopped}};
    meta["best_val_auroc"] = std::isfinite(net.meta.best_val_auroc) ? nlohmann::json(net.meta.best_val_auroc)
                                                                     : nlohmann::json(nullptr);
    h["training_meta"] = meta;
    h["standardizer"] = {{"mean", net.standardizer.mean},
                         {"std", net.standardizer.std},
                         {"epsilon", net.standardizer.epsilon}};
    h["run"] = ck.meta;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot create " + path);
    out.write("SBCK", 4);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_string(out, h.dump());
    auto put_f64 = [&](double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        detail::put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffU));
        detail::put_u32(out, static_cast<std::uint32_t>(bits >> 32));
    };
    for (const auto& L : net.layers) {
        for (double w : L.weight) put_f64(w);
        for (double b : L.bias) put_f64(b);
    }
    detail::finish(out, path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    detail::ByteReader r(detail::slurp(path));
    if (r.remaining() < 4 || r.bytes(4) != "SBCK") throw data_error(path + ": not a checkpoint file");
    if (const auto v = r.u32(); v != kCheckpointVersion)
        throw data_error(path + ": unsupported checkpoint version " + std::to_string(v));
    Checkpoint ck;
    try {
        const auto h = nlohmann::json::parse(r.bytes(r.u32()));
        ck.side = h.at("side").get<std::string>();
        const auto& n = h.at("net");
        auto& cfg = ck.net.config;
        cfg.input_dim = n.at("input_dim").get<std::size_t>();
        cfg.hidden_dims = n.at("hidden_dims").get<std::vector<std::size_t>>();
        cfg.dropout_rate = n.at("dropout_rate").get<double>();
        cfg.seed = n.at("seed").get<std::uint64_t>();
        const auto& t = h.at("train");
        auto& tc = ck.train_config;
        tc.lr = t.at("lr").get<double>();
        tc.weight_decay = t.at("weight_decay").get<double>();
        tc.beta1 = t.at("beta1").get<double>();
        tc.beta2 = t.at("beta2").get<double>();
        tc.eps_opt = t.at("eps_opt").get<double>();
        tc.batch_size = t.at("batch_size").get<std::size_t>();
        tc.max_epochs = t.at("max_epochs").get<std::size_t>();
        tc.patience = t.at("patience").get<std::size_t>();
        for (const auto& shape : h.at("layers"))
            ck.net.layers.emplace_back(shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>());
        const auto& m = h.at("training_meta");
        ck.net.meta.epochs_run = m.at("epochs_run").get<std::size_t>();
        ck.net.meta.best_epoch = m.at("best_epoch").get<std::size_t>();
        ck.net.meta.early_stopped = m.at("early_stopped").get<bool>();
        if (!m.at("best_val_auroc").is_null()) ck.net.meta.best_val_auroc = m.at("best_val_auroc").get<double>();
        const auto& s = h.at("standardizer");
        ck.net.standardizer.mean = s.at("mean").get<Vector>();
        ck.net.standardizer.std = s.at("std").get<Vector>();
        ck.net.standardizer.epsilon = s.at("epsilon").get<double>();
        if (h.contains("run")) ck.meta = h.at("run");
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": malformed checkpoint header: " + e.what());
    }
    auto get_f64 = [&] {
        const std::uint64_t lo = r.u32();
        const std::uint64_t hi = r.u32();
        return std::bit_cast<double>(lo | (hi << 32));
    };
    for (auto& L : ck.net.layers) {
        for (double& w : L.weight) w = get_f64();
        for (double& b : L.bias) b = get_f64();
    }
    if (r.remaining() != 0) throw data_error(path + ": trailing bytes after parameters");
    try {
        ck.net.validate();
    } catch (const Error& e) {
        throw data_error(path + ": " + e.what());
    }
    if (ck.net.input_dim() != ck.net.config.input_dim)
        throw data_error(path + ": layer shapes disagree with input_dim");
    if (!ck.net.standardizer.mean.empty() && ck.net.standardizer.dim() != ck.net.input_dim())
        throw data_error(path + ": standardizer dimension disagrees with input_dim");
    return ck;
}

} // namespace saber
