// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/config.hpp"

#include <fstream>

#include <json.hpp>

namespace wsim::harness {

using nlohmann::json;

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.ofdm = phy::default_ofdm_config();
    cfg.channel.n_taps = 8;
    cfg.channel.decay = 0.5;
    cfg.channel.snr_db = 15.0;
    cfg.modalities = {jscc::Modality::Image, jscc::Modality::Video, jscc::Modality::Speech,
                      jscc::Modality::Text};
    cfg.constellations = {phy::Constellation::Qam16};
    cfg.rate_denoms = {6};
    return cfg;
}

void ExperimentConfig::validate() const {
    if (modalities.empty() || constellations.empty() || rate_denoms.empty())
        throw ConfigError("config: codec grid must be nonempty");
    for (int d : rate_denoms)
        if (d != 6 && d != 12) throw ConfigError("config: coding rate must be 1/6 or 1/12");
    if (scenario != "los" && scenario != "nlos")
        throw ConfigError("config: scenario must be los or nlos");
    if (!allow_psr_override) {
        for (double p : psr_list)
            if (p < -20.0 - 1e-9 || p > -10.0 + 1e-9)
                throw ConfigError("config: psr values must stay within [-20,-10] dB");
        for (double p : downstream_psr_list)
            if (p < -20.0 - 1e-9 || p > -10.0 + 1e-9)
                throw ConfigError("config: psr values must stay within [-20,-10] dB");
    }
    if (mu < 1) throw ConfigError("config: mu must be >= 1");
    for (jscc::Modality q : modalities)
        for (int d : rate_denoms)
            if (jscc::n_payload_rows(q, d) > rows_total())
                throw ConfigError("config: mu * n_g does not cover the longest signal");
    ofdm.validate();
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    j["seed"] = seed;
    j["scenario"] = scenario;
    j["channel"] = {{"taps", channel.n_taps}, {"snr_db", channel.snr_db}};
    json mods = json::array(), cons = json::array(), rates = json::array();
    for (auto q : modalities) mods.push_back(jscc::modality_name(q));
    for (auto c : constellations) cons.push_back(phy::constellation_name(c));
    for (int d : rate_denoms) rates.push_back("1/" + std::to_string(d));
    j["codecs"] = {{"modalities", mods}, {"constellations", cons}, {"rates", rates}};
    j["jscc_train"] = {{"epochs", jscc_epochs},        {"batch", jscc_batch},
                       {"lr", jscc_lr},                {"train_items", jscc_train_items},
                       {"val_items", jscc_val_items},  {"video_epochs", video_epochs},
                       {"video_batch", video_batch},   {"video_train_items", video_train_items},
                       {"video_val_items", video_val_items}, {"text_epochs", text_epochs},
                       {"text_train_items", text_train_items}};
    j["downstream_train"] = {{"epochs", clf_epochs},
                             {"lr", clf_lr},
                             {"vc_train_items", vc_train_items},
                             {"ave_train_items", ave_train_items},
                             {"test_items", clf_test_items}};
    j["pgm"] = {{"latent_dim", latent_dim},
                {"n_g", n_g},
                {"mu", mu},
                {"epochs", pgm_epochs},
                {"batches_per_modality", pgm_batches_per_modality},
                {"batch_size", pgm_batch_size},
                {"psr_min", psr_min},
                {"psr_max", psr_max},
                {"beta_cls", beta_cls},
                {"beta_ds", beta_ds},
                {"beta_dv", beta_dv},
                {"stealth", pgm_stealth},
                {"downstream_terms", pgm_downstream_terms},
                {"train_nonstealth", train_nonstealth_pgm},
                {"attacker_channels", attacker_channel_count},
                {"vanilla_iterations", vanilla_iterations}};
    j["sweep"] = {{"psr_list", psr_list},
                  {"trials", sweep_trials},
                  {"downstream_psr_list", downstream_psr_list},
                  {"downstream_trials", downstream_trials}};
    j["defense"] = {{"trials", defense_trials},
                    {"detector_epochs", detector_epochs},
                    {"detector_samples", detector_samples},
                    {"defender_pgm_epochs", defender_pgm_epochs}};
    j["allow_psr_override"] = allow_psr_override;
    return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a64(canonical_json()); }

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid json: ") + e.what());
    }
    ExperimentConfig cfg = default_config();
    try {
        maybe(j, "seed", cfg.seed);
        maybe(j, "out_dir", cfg.out_dir);
        maybe(j, "scenario", cfg.scenario);
        if (j.contains("channel")) {
            const auto& c = j.at("channel");
            maybe(c, "taps", cfg.channel.n_taps);
            maybe(c, "snr_db", cfg.channel.snr_db);
        }
        cfg.channel.decay = cfg.scenario == "nlos" ? 1.0 : 0.5;
        if (j.contains("codecs")) {
            const auto& c = j.at("codecs");
            if (c.contains("modalities")) {
                cfg.modalities.clear();
                for (const auto& m : c.at("modalities"))
                    cfg.modalities.push_back(jscc::modality_from_name(m.get<std::string>()));
            }
            if (c.contains("constellations")) {
                cfg.constellations.clear();
                for (const auto& m : c.at("constellations"))
                    cfg.constellations.push_back(phy::constellation_from_name(m.get<std::string>()));
            }
            if (c.contains("rates")) {
                cfg.rate_denoms.clear();
                for (const auto& r : c.at("rates")) {
                    const std::string s = r.get<std::string>();
                    if (s == "1/6")
                        cfg.rate_denoms.push_back(6);
                    else if (s == "1/12")
                        cfg.rate_denoms.push_back(12);
                    else
                        throw ConfigError("config: unknown rate " + s);
                }
            }
        }
        if (j.contains("jscc_train")) {
            const auto& t = j.at("jscc_train");
            maybe(t, "epochs", cfg.jscc_epochs);
            maybe(t, "batch", cfg.jscc_batch);
            maybe(t, "lr", cfg.jscc_lr);
            maybe(t, "train_items", cfg.jscc_train_items);
            maybe(t, "val_items", cfg.jscc_val_items);
            maybe(t, "video_epochs", cfg.video_epochs);
            maybe(t, "video_batch", cfg.video_batch);
            maybe(t, "video_train_items", cfg.video_train_items);
            maybe(t, "video_val_items", cfg.video_val_items);
            maybe(t, "text_epochs", cfg.text_epochs);
            maybe(t, "text_train_items", cfg.text_train_items);
        }
        if (j.contains("downstream_train")) {
            const auto& t = j.at("downstream_train");
            maybe(t, "epochs", cfg.clf_epochs);
            maybe(t, "lr", cfg.clf_lr);
            maybe(t, "vc_train_items", cfg.vc_train_items);
            maybe(t, "ave_train_items", cfg.ave_train_items);
            maybe(t, "test_items", cfg.clf_test_items);
        }
        if (j.contains("pgm")) {
            const auto& t = j.at("pgm");
            maybe(t, "latent_dim", cfg.latent_dim);
            maybe(t, "n_g", cfg.n_g);
            maybe(t, "mu", cfg.mu);
            maybe(t, "epochs", cfg.pgm_epochs);
            maybe(t, "batches_per_modality", cfg.pgm_batches_per_modality);
            maybe(t, "batch_size", cfg.pgm_batch_size);
            maybe(t, "lr", cfg.pgm_lr);
            maybe(t, "psr_min", cfg.psr_min);
            maybe(t, "psr_max", cfg.psr_max);
            maybe(t, "beta_cls", cfg.beta_cls);
            maybe(t, "beta_ds", cfg.beta_ds);
            maybe(t, "beta_dv", cfg.beta_dv);
            maybe(t, "stealth", cfg.pgm_stealth);
            maybe(t, "downstream_terms", cfg.pgm_downstream_terms);
            maybe(t, "train_nonstealth", cfg.train_nonstealth_pgm);
            maybe(t, "attacker_channels", cfg.attacker_channel_count);
            maybe(t, "vanilla_iterations", cfg.vanilla_iterations);
        }
        if (j.contains("sweep")) {
            const auto& t = j.at("sweep");
            maybe(t, "psr_list", cfg.psr_list);
            maybe(t, "trials", cfg.sweep_trials);
            maybe(t, "downstream_psr_list", cfg.downstream_psr_list);
            maybe(t, "downstream_trials", cfg.downstream_trials);
        }
        if (j.contains("defense")) {
            const auto& t = j.at("defense");
            maybe(t, "trials", cfg.defense_trials);
            maybe(t, "detector_epochs", cfg.detector_epochs);
            maybe(t, "detector_samples", cfg.detector_samples);
            maybe(t, "defender_pgm_epochs", cfg.defender_pgm_epochs);
        }
        maybe(j, "allow_psr_override", cfg.allow_psr_override);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_config_json(text);
}

std::uint64_t derived_seed(std::uint64_t master, const std::string& label) {
    return RngStream(master).derive(label).next_u64();
}

} // namespace wsim::harness
