// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "wsim/checkpoint.hpp"
#include "wsim/metrics.hpp"

namespace wsim::harness {

namespace fs = std::filesystem;
using jscc::ArchVariant;
using jscc::CodecSpec;
using jscc::JsccCodec;
using jscc::Modality;
using nlohmann::json;
using phy::SymbolGrid;

// ---- csv ----

std::string csv_header() {
    return "stage,scenario,seed,config_hash,codec,modality,task,psr_db,arm,metric,value,trials";
}

static std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string csv_line(const CsvRow& r) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.config_hash));
    std::string out;
    out += r.stage + "," + r.scenario + "," + std::to_string(r.seed) + "," + hash + ",";
    out += r.codec + "," + r.modality + "," + r.task + ",";
    out += fmt_double(r.psr_db) + "," + r.arm + "," + r.metric + "," + fmt_double(r.value) + "," +
           std::to_string(r.trials);
    return out;
}

void write_csv(const std::string& path, const std::vector<CsvRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw StageError("cannot write csv: " + path);
    f << csv_header() << "\n";
    for (const auto& r : rows) f << csv_line(r) << "\n";
}

// ---- artifacts ----

std::string checkpoint_dir(const ExperimentConfig& cfg) { return cfg.out_dir + "/ckpt"; }

std::string codec_checkpoint_path(const ExperimentConfig& cfg, const CodecSpec& spec) {
    return checkpoint_dir(cfg) + "/codec_" + spec.tag() + ".bin";
}

std::shared_ptr<JsccCodec> build_codec(const ExperimentConfig& cfg, const CodecSpec& spec) {
    return std::make_shared<JsccCodec>(spec, derived_seed(cfg.seed, "codec-init:" + spec.tag()));
}

std::shared_ptr<JsccCodec> load_codec(const ExperimentConfig& cfg, const CodecSpec& spec) {
    auto codec = build_codec(cfg, spec);
    const std::string path = codec_checkpoint_path(cfg, spec);
    if (!fs::exists(path)) throw StageError("missing checkpoint: " + path);
    codec->params().load_tensors(load_checkpoint(path));
    return codec;
}

std::unique_ptr<task::Classifier> build_classifier(const ExperimentConfig& cfg, task::TaskKind task,
                                                   ArchVariant variant) {
    const std::string label =
        std::string("clf-init:") + task::task_name(task) + ":" + jscc::variant_name(variant);
    return std::make_unique<task::Classifier>(task, variant, derived_seed(cfg.seed, label));
}

static std::string classifier_path(const ExperimentConfig& cfg, task::TaskKind task,
                                   ArchVariant variant) {
    return checkpoint_dir(cfg) + "/clf_" + task::task_name(task) + "_" +
           jscc::variant_name(variant) + ".bin";
}

std::unique_ptr<task::Classifier> load_classifier(const ExperimentConfig& cfg, task::TaskKind task,
                                                  ArchVariant variant) {
    auto clf = build_classifier(cfg, task, variant);
    const std::string path = classifier_path(cfg, task, variant);
    if (!fs::exists(path)) throw StageError("missing checkpoint: " + path);
    clf->params().load_tensors(load_checkpoint(path));
    return clf;
}

attack::PgmConfig pgm_config(const ExperimentConfig& cfg) {
    attack::PgmConfig pc;
    pc.latent_dim = cfg.latent_dim;
    pc.n_g = cfg.n_g;
    pc.n_fft = cfg.ofdm.n_fft;
    return pc;
}

std::unique_ptr<attack::Pgm> load_pgm(const ExperimentConfig& cfg, const std::string& name) {
    auto pgm = std::make_unique<attack::Pgm>(pgm_config(cfg), derived_seed(cfg.seed, "init:" + name));
    const std::string path = checkpoint_dir(cfg) + "/" + name + ".bin";
    if (!fs::exists(path)) throw StageError("missing checkpoint: " + path);
    pgm->params().load_tensors(load_checkpoint(path));
    return pgm;
}

phy::SymbolGrid load_vanilla(const ExperimentConfig& cfg) {
    const std::string path = checkpoint_dir(cfg) + "/vanilla_uap.bin";
    if (!fs::exists(path)) throw StageError("missing checkpoint: " + path);
    const auto tensors = load_checkpoint(path);
    return SymbolGrid::from_tensor(tensors.at("delta"));
}

jscc::ModalityDataset modality_data(const ExperimentConfig& cfg, Modality q,
                                    const std::string& split, std::size_t size) {
    const std::uint64_t seed =
        derived_seed(cfg.seed, std::string("data:") + jscc::modality_name(q) + ":" + split);
    switch (q) {
        case Modality::Image: return jscc::image_dataset(synth_images(size, seed));
        case Modality::Video: return jscc::video_dataset(synth_video_gops(size, seed));
        case Modality::Speech: return jscc::speech_dataset(synth_speech(size, seed));
        case Modality::Text: return jscc::text_dataset(synth_text(size, seed));
    }
    throw std::logic_error("unreachable");
}

attack::AttackTrainData attack_data(const ExperimentConfig& cfg, const std::string& split,
                                    std::size_t size) {
    attack::AttackTrainData data;
    data.images = synth_images(size, derived_seed(cfg.seed, "data:image:" + split));
    data.waves = synth_speech(size, derived_seed(cfg.seed, "data:speech:" + split));
    data.sentences = synth_text(size * 2, derived_seed(cfg.seed, "data:text:" + split));
    data.ave_pairs = synth_ave(size, derived_seed(cfg.seed, "data:ave:" + split));
    const auto clips = synth_vc(std::max<std::size_t>(size / 2, 8),
                                derived_seed(cfg.seed, "data:clips:" + split));
    for (const auto& c : clips) data.clips.push_back(c.clip);
    return data;
}

std::vector<phy::ChannelRealization> attacker_channel_set(const ExperimentConfig& cfg) {
    RngStream rng(derived_seed(cfg.seed, "attacker-channels"));
    return attack::draw_attacker_channels(cfg.attacker_channel_count, cfg.channel, cfg.ofdm.n_fft,
                                          rng);
}

attack::SurrogateEnsemble load_surrogate_ensemble(const ExperimentConfig& cfg) {
    attack::SurrogateEnsemble ens;
    ens.channel = cfg.channel;
    for (Modality q : cfg.modalities)
        for (auto c : cfg.constellations)
            for (int d : cfg.rate_denoms) {
                CodecSpec spec{q, c, d, ArchVariant::Narrow};
                auto codec = load_codec(cfg, spec);
                attack::freeze_codec(*codec);
                ens.codecs.push_back(std::move(codec));
            }
    ens.attacker_channels = attacker_channel_set(cfg);
    return ens;
}

jscc::TrainConfig jscc_train_config(const ExperimentConfig& cfg, Modality q) {
    jscc::TrainConfig tc;
    tc.channel = cfg.channel;
    tc.ofdm = cfg.ofdm;
    tc.lr = cfg.jscc_lr;
    tc.batch = cfg.jscc_batch;
    tc.epochs = cfg.jscc_epochs;
    switch (q) {
        case Modality::Video:
            tc.epochs = cfg.video_epochs;
            tc.batch = cfg.video_batch;
            break;
        case Modality::Text:
            tc.epochs = cfg.text_epochs;
            tc.soft_fraction = 0.5;
            break;
        default: break;
    }
    return tc;
}

// ---- stages ----

namespace {

std::uint64_t data_checksum(const std::vector<double>& values) {
    std::string bytes(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
    return fnv1a64(bytes);
}

std::vector<CsvRow> stage_synth_data(const ExperimentConfig& cfg) {
    std::vector<CsvRow> rows;
    auto add = [&](const std::string& kind, double checksum, std::size_t count) {
        CsvRow r;
        r.stage = "synth-data";
        r.scenario = cfg.scenario;
        r.seed = cfg.seed;
        r.config_hash = cfg.config_hash();
        r.modality = kind;
        r.metric = "checksum";
        r.value = checksum;
        r.trials = count;
        rows.push_back(r);
    };
    const auto images = synth_images(cfg.jscc_train_items, derived_seed(cfg.seed, "data:image:train"));
    std::vector<double> acc;
    for (const auto& t : images) acc.insert(acc.end(), t.vec().begin(), t.vec().end());
    add("image", static_cast<double>(data_checksum(acc) >> 32), images.size());

    const auto waves = synth_speech(cfg.jscc_train_items, derived_seed(cfg.seed, "data:speech:train"));
    acc.clear();
    for (const auto& t : waves) acc.insert(acc.end(), t.vec().begin(), t.vec().end());
    add("speech", static_cast<double>(data_checksum(acc) >> 32), waves.size());

    const auto sentences = synth_text(cfg.text_train_items, derived_seed(cfg.seed, "data:text:train"));
    acc.clear();
    std::size_t in_range = 0;
    for (const auto& s : sentences) {
        if (s.size() >= 4 && s.size() <= 12) ++in_range;
        for (int tok : s) acc.push_back(tok);
    }
    if (in_range != sentences.size()) throw StageError("synth-data: text length bound violated");
    add("text", static_cast<double>(data_checksum(acc) >> 32), sentences.size());

    const auto clips = synth_vc(cfg.vc_train_items, derived_seed(cfg.seed, "data:vc:train"));
    std::vector<std::size_t> class_counts(harness::kMotionClasses, 0);
    for (const auto& c : clips) class_counts[c.label]++;
    const auto [mn, mx] = std::minmax_element(class_counts.begin(), class_counts.end());
    if (*mx - *mn > 1) throw StageError("synth-data: vc labels not balanced");
    add("vc", static_cast<double>(*mx), clips.size());

    const auto pairs = synth_ave(cfg.ave_train_items, derived_seed(cfg.seed, "data:ave:train"));
    add("ave", static_cast<double>(pairs.size()), pairs.size());
    return rows;
}

std::vector<CsvRow> stage_train_jscc(const ExperimentConfig& cfg) {
    std::vector<CsvRow> rows;
    fs::create_directories(checkpoint_dir(cfg));
    for (auto variant : {ArchVariant::Target, ArchVariant::Narrow}) {
        // surrogates train on a differently-seeded corpus, standing in for
        // the attacker's public data
        const std::string split = variant == ArchVariant::Target ? "train" : "train-surrogate";
        const std::string vsplit = variant == ArchVariant::Target ? "val" : "val-surrogate";
        for (auto c : cfg.constellations)
            for (int d : cfg.rate_denoms) {
                std::shared_ptr<JsccCodec> image_codec; // warm start source
                for (Modality q : cfg.modalities) {
                    CodecSpec spec{q, c, d, variant};
                    auto codec = build_codec(cfg, spec);
                    jscc::TrainConfig tc = jscc_train_config(cfg, q);
                    tc.seed = derived_seed(cfg.seed, "train:" + spec.tag());
                    std::size_t train_items = cfg.jscc_train_items;
                    std::size_t val_items = cfg.jscc_val_items;
                    if (q == Modality::Video) {
                        train_items = cfg.video_train_items;
                        val_items = cfg.video_val_items;
                        if (image_codec) jscc::warm_start_from(*codec, *image_codec);
                    } else if (q == Modality::Text) {
                        train_items = cfg.text_train_items;
                    }
                    const auto train = modality_data(cfg, q, split, train_items);
                    const auto val = modality_data(cfg, q, vsplit, val_items);
                    const auto report = jscc::train_jscc(*codec, train, val, tc);
                    if (q == Modality::Image) image_codec = codec;
                    save_checkpoint(codec->params().to_tensors(), codec_checkpoint_path(cfg, spec));
                    CsvRow r;
                    r.stage = "train-jscc";
                    r.scenario = cfg.scenario;
                    r.seed = cfg.seed;
                    r.config_hash = cfg.config_hash();
                    r.codec = spec.tag();
                    r.modality = jscc::modality_name(q);
                    r.metric = "initial_val_loss";
                    r.value = report.initial_val_loss;
                    r.trials = val.size();
                    rows.push_back(r);
                    r.metric = "final_val_loss";
                    r.value = report.final_val_loss;
                    rows.push_back(r);
                    r.metric = "val_loss_ratio";
                    r.value = report.final_val_loss / report.initial_val_loss;
                    rows.push_back(r);
                }
            }
    }
    return rows;
}

std::vector<CsvRow> stage_train_downstream(const ExperimentConfig& cfg) {
    std::vector<CsvRow> rows;
    fs::create_directories(checkpoint_dir(cfg));
    auto emit = [&](task::TaskKind task, ArchVariant variant, double acc, std::size_t n) {
        CsvRow r;
        r.stage = "train-downstream";
        r.scenario = cfg.scenario;
        r.seed = cfg.seed;
        r.config_hash = cfg.config_hash();
        r.task = task::task_name(task);
        r.codec = jscc::variant_name(variant);
        r.metric = "clean_accuracy";
        r.value = acc;
        r.trials = n;
        rows.push_back(r);
    };
    const auto vc_train = synth_vc(cfg.vc_train_items, derived_seed(cfg.seed, "data:vc:train"));
    const auto vc_test = synth_vc(cfg.clf_test_items, derived_seed(cfg.seed, "data:vc:test"));
    const auto ave_train = synth_ave(cfg.ave_train_items, derived_seed(cfg.seed, "data:ave:train"));
    const auto ave_test = synth_ave(cfg.clf_test_items, derived_seed(cfg.seed, "data:ave:test"));
    for (auto variant : {ArchVariant::Target, ArchVariant::Narrow}) {
        task::ClassifierTrainConfig cc;
        cc.epochs = cfg.clf_epochs;
        cc.lr = cfg.clf_lr;
        {
            auto clf = build_classifier(cfg, task::TaskKind::Vc, variant);
            cc.seed = derived_seed(cfg.seed, std::string("train:vc:") + jscc::variant_name(variant));
            task::train_vc(*clf, vc_train, cc);
            const double acc = task::vc_accuracy(*clf, vc_test);
            save_checkpoint(clf->params().to_tensors(),
                            classifier_path(cfg, task::TaskKind::Vc, variant));
            emit(task::TaskKind::Vc, variant, acc, vc_test.size());
        }
        {
            auto clf = build_classifier(cfg, task::TaskKind::Ave, variant);
            cc.seed = derived_seed(cfg.seed, std::string("train:ave:") + jscc::variant_name(variant));
            task::train_ave(*clf, ave_train, cc);
            const double acc = task::ave_accuracy(*clf, ave_test);
            save_checkpoint(clf->params().to_tensors(),
                            classifier_path(cfg, task::TaskKind::Ave, variant));
            emit(task::TaskKind::Ave, variant, acc, ave_test.size());
        }
    }
    return rows;
}

attack::AttackTrainConfig attack_train_config(const ExperimentConfig& cfg) {
    attack::AttackTrainConfig ac;
    ac.epochs = cfg.pgm_epochs;
    ac.batches_per_modality = cfg.pgm_batches_per_modality;
    ac.batch_size = cfg.pgm_batch_size;
    ac.psr_min = cfg.psr_min;
    ac.psr_max = cfg.psr_max;
    ac.beta_cls_vc = cfg.beta_cls;
    ac.beta_cls_ave = cfg.beta_cls;
    ac.beta_ds = cfg.beta_ds;
    ac.beta_dv = cfg.beta_dv;
    ac.mu = cfg.mu;
    ac.lr_g = cfg.pgm_lr;
    ac.stealth = cfg.pgm_stealth;
    ac.downstream = cfg.pgm_downstream_terms;
    ac.verbose = true;
    ac.ofdm = cfg.ofdm;
    return ac;
}

std::vector<CsvRow> stage_train_pgm(const ExperimentConfig& cfg) {
    std::vector<CsvRow> rows;
    fs::create_directories(checkpoint_dir(cfg));
    const auto ensemble = load_surrogate_ensemble(cfg);
    const auto data = attack_data(cfg, "attack", 96);
    attack::DownstreamSurrogates surrogates;
    std::unique_ptr<task::Classifier> vc, ave;
    if (cfg.pgm_downstream_terms) {
        vc = load_classifier(cfg, task::TaskKind::Vc, ArchVariant::Narrow);
        ave = load_classifier(cfg, task::TaskKind::Ave, ArchVariant::Narrow);
        vc->freeze();
        ave->freeze();
        surrogates.vc = vc.get();
        surrogates.ave = ave.get();
    }
    auto emit = [&](const std::string& name) {
        CsvRow r;
        r.stage = "train-pgm";
        r.scenario = cfg.scenario;
        r.seed = cfg.seed;
        r.config_hash = cfg.config_hash();
        r.codec = name;
        r.metric = "trained";
        r.value = 1.0;
        rows.push_back(r);
    };
    {
        attack::Pgm pgm(pgm_config(cfg), derived_seed(cfg.seed, "init:pgm_stealth"));
        attack::Discriminator disc(32, derived_seed(cfg.seed, "init:disc"));
        attack::AttackTrainConfig ac = attack_train_config(cfg);
        ac.seed = derived_seed(cfg.seed, "train:pgm");
        attack::train_pgm(pgm, disc, ensemble, data, surrogates, ac);
        save_checkpoint(pgm.params().to_tensors(), checkpoint_dir(cfg) + "/pgm_stealth.bin");
        save_checkpoint(disc.params().to_tensors(), checkpoint_dir(cfg) + "/disc_stealth.bin");
        emit("pgm_stealth");
    }
    if (cfg.train_nonstealth_pgm) {
        attack::Pgm pgm(pgm_config(cfg), derived_seed(cfg.seed, "init:pgm_nonstealth"));
        attack::Discriminator disc(32, derived_seed(cfg.seed, "init:disc_nonstealth"));
        attack::AttackTrainConfig ac = attack_train_config(cfg);
        ac.stealth = false;
        ac.seed = derived_seed(cfg.seed, "train:pgm_nonstealth");
        attack::train_pgm(pgm, disc, ensemble, data, surrogates, ac);
        save_checkpoint(pgm.params().to_tensors(), checkpoint_dir(cfg) + "/pgm_nonstealth.bin");
        emit("pgm_nonstealth");
    }
    {
        // entry-level single-perturbation baseline against one image surrogate
        const JsccCodec* image_surrogate = nullptr;
        for (const auto& c : ensemble.codecs)
            if (c->spec().q == Modality::Image) {
                image_surrogate = c.get();
                break;
            }
        if (image_surrogate == nullptr) throw StageError("train-pgm: no image surrogate for the baseline");
        const SymbolGrid delta = attack::train_vanilla_uap(
            *image_surrogate, data.images, cfg.rows_total(), cfg.channel, cfg.ofdm,
            cfg.vanilla_iterations, -10.0, derived_seed(cfg.seed, "train:vanilla"));
        save_checkpoint({{"delta", delta.to_tensor()}}, checkpoint_dir(cfg) + "/vanilla_uap.bin");
        emit("vanilla_uap");
    }
    return rows;
}

const char* modality_metric_name(Modality q) {
    switch (q) {
        case Modality::Image:
        case Modality::Video: return "psnr_db";
        case Modality::Speech: return "mse";
        case Modality::Text: return "bleu";
    }
    return "?";
}

std::vector<CsvRow> stage_attack_sweep(const ExperimentConfig& cfg) {
    std::vector<CsvRow> rows;
    const auto pgm = load_pgm(cfg, "pgm_stealth");
    const SymbolGrid vanilla = load_vanilla(cfg);
    attack::AttackArtifacts art;
    art.pgm = pgm.get();
    art.vanilla = &vanilla;
    art.mu = cfg.mu;
    art.rows_total = cfg.rows_total();
    art.shuffle_domain = &cfg.ofdm.data_subcarriers;
    const std::vector<attack::Arm> arms = {attack::Arm::None, attack::Arm::Random,
                                           attack::Arm::Vanilla, attack::Arm::TrainedPgm};

    attack::SweepConfig sc;
    sc.psr_list = cfg.psr_list;
    sc.trials = cfg.sweep_trials;
    sc.ofdm = cfg.ofdm;
    sc.channel = cfg.channel;
    sc.seed = derived_seed(cfg.seed, "sweep");

    const auto eval_data = attack_data(cfg, "eval", std::max<std::size_t>(cfg.sweep_trials / 2, 16));
    for (auto c : cfg.constellations)
        for (int d : cfg.rate_denoms)
            for (Modality q : cfg.modalities) {
                CodecSpec spec{q, c, d, ArchVariant::Target};
                auto target = load_codec(cfg, spec);
                attack::freeze_codec(*target);
                const auto sweep = attack::sweep_modality(*target, eval_data, art, sc, arms);
                for (const auto& [psr, by_arm] : sweep.metric)
                    for (const auto& [arm, values] : by_arm) {
                        double mean = 0.0;
                        for (double v : values) mean += v;
                        mean /= static_cast<double>(values.size());
                        CsvRow r;
                        r.stage = "attack-sweep";
                        r.scenario = cfg.scenario;
                        r.seed = cfg.seed;
                        r.config_hash = cfg.config_hash();
                        r.codec = spec.tag();
                        r.modality = jscc::modality_name(q);
                        r.psr_db = psr;
                        r.arm = attack::arm_name(arm);
                        r.metric = modality_metric_name(q);
                        r.value = mean;
                        r.trials = values.size();
                        rows.push_back(r);
                    }
            }

    // downstream success rates
    const auto c0 = cfg.constellations.front();
    const int d0 = cfg.rate_denoms.front();
    const bool has_video = std::count(cfg.modalities.begin(), cfg.modalities.end(), Modality::Video);
    const bool has_image = std::count(cfg.modalities.begin(), cfg.modalities.end(), Modality::Image);
    const bool has_speech =
        std::count(cfg.modalities.begin(), cfg.modalities.end(), Modality::Speech);
    const std::vector<attack::Arm> atk_arms = {attack::Arm::Random, attack::Arm::Vanilla,
                                               attack::Arm::TrainedPgm};
    for (double psr : cfg.downstream_psr_list) {
        if (has_video) {
            auto clf = load_classifier(cfg, task::TaskKind::Vc, ArchVariant::Target);
            auto codec = load_codec(cfg, CodecSpec{Modality::Video, c0, d0, ArchVariant::Target});
            const auto clips = synth_vc(cfg.downstream_trials, derived_seed(cfg.seed, "data:vc:eval"));
            attack::SweepConfig dsc = sc;
            dsc.seed = derived_seed(cfg.seed, "downstream:vc");
            const auto eval = attack::eval_downstream_vc(*clf, *codec, clips, art, psr,
                                                         cfg.downstream_trials, dsc, atk_arms);
            for (const auto& [arm, rate] : eval.untargeted_success) {
                CsvRow r;
                r.stage = "attack-sweep";
                r.scenario = cfg.scenario;
                r.seed = cfg.seed;
                r.config_hash = cfg.config_hash();
                r.task = "vc";
                r.psr_db = psr;
                r.arm = attack::arm_name(arm);
                r.metric = "untargeted_success";
                r.value = rate;
                r.trials = cfg.downstream_trials;
                rows.push_back(r);
                r.metric = "targeted_success";
                r.value = eval.targeted_success.at(arm);
                rows.push_back(r);
            }
        }
        if (has_image && has_speech) {
            auto clf = load_classifier(cfg, task::TaskKind::Ave, ArchVariant::Target);
            auto icodec = load_codec(cfg, CodecSpec{Modality::Image, c0, d0, ArchVariant::Target});
            auto scodec = load_codec(cfg, CodecSpec{Modality::Speech, c0, d0, ArchVariant::Target});
            const auto pairs =
                synth_ave(cfg.downstream_trials, derived_seed(cfg.seed, "data:ave:eval"));
            attack::SweepConfig dsc = sc;
            dsc.seed = derived_seed(cfg.seed, "downstream:ave");
            const auto eval = attack::eval_downstream_ave(*clf, *icodec, *scodec, pairs, art, psr,
                                                          cfg.downstream_trials, dsc, atk_arms);
            for (const auto& [arm, rate] : eval.untargeted_success) {
                CsvRow r;
                r.stage = "attack-sweep";
                r.scenario = cfg.scenario;
                r.seed = cfg.seed;
                r.config_hash = cfg.config_hash();
                r.task = "ave";
                r.psr_db = psr;
                r.arm = attack::arm_name(arm);
                r.metric = "untargeted_success";
                r.value = rate;
                r.trials = cfg.downstream_trials;
                rows.push_back(r);
                r.metric = "targeted_success";
                r.value = eval.targeted_success.at(arm);
                rows.push_back(r);
            }
        }
    }
    return rows;
}

// defense evaluation over image transmissions at a fixed psr
struct DefenseTrialStats {
    double psnr_none = 0.0, psnr_attacked = 0.0, psnr_synced = 0.0, psnr_unsynced = 0.0,
           psnr_subtract = 0.0;
    double attack_power = 0.0, residual_power = 0.0;
};

DefenseTrialStats run_defense_trials(const ExperimentConfig& cfg, const JsccCodec& codec,
                                     const attack::Pgm& attacker, const attack::Pgm& defender,
                                     double psr, std::size_t trials) {
    DefenseTrialStats acc;
    RngStream root(derived_seed(cfg.seed, "defend"));
    const auto images = synth_images(std::max<std::size_t>(trials / 2, 8),
                                     derived_seed(cfg.seed, "data:image:defense"));
    attack::AttackArtifacts art;
    art.pgm = &attacker;
    art.mu = cfg.mu;
    art.rows_total = cfg.rows_total();
    art.shuffle_domain = &cfg.ofdm.data_subcarriers;
    const std::size_t rows = codec.payload_rows();
    const double nv = std::pow(10.0, -cfg.channel.snr_db / 10.0);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        RngStream s = root.derive(trial);
        const nn::Tensor& x = images[trial % images.size()];
        RngStream ht_rng = s.derive("ht"), ha_rng = s.derive("ha"), noise_rng = s.derive("noise");
        RngStream perm_rng = s.derive("perm"), pert_rng = s.derive("pert"), def_rng = s.derive("def");
        const auto ht = sample_channel(ht_rng, cfg.channel, cfg.ofdm.n_fft);
        const auto ha = sample_channel(ha_rng, cfg.channel, cfg.ofdm.n_fft);
        const SymbolGrid pre_noise = phy::draw_noise(1, cfg.ofdm.n_fft, nv, noise_rng);
        const SymbolGrid pay_noise = phy::draw_noise(rows, cfg.ofdm.n_fft, nv, noise_rng);
        std::vector<std::size_t> perm(48);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[perm_rng.uniform_int(i)]);

        // attacker internals
        const auto draws = attack::draw_perturbation_inputs(pert_rng, art, cfg.ofdm);
        jscc::GopBuffer b0;
        const SymbolGrid payload = codec.encode(x, b0);
        const SymbolGrid mapped = map_constellation(payload, codec.spec().c);
        const double vp = attack::full_band_power(mapped, cfg.ofdm);
        const double eps = attack::psr_to_epsilon_power(vp, psr);
        attack::TransformParams tau;
        tau.mu = cfg.mu;
        tau.zeta = draws.zeta;
        tau.epsilon = eps;
        tau.phi = draws.phi;
        tau.delta_t = draws.delta_t;
        const SymbolGrid delta = attacker.generate(draws.z);
        const SymbolGrid pert = attack::apply_transform(delta, tau);

        auto receive_metric = [&](const SymbolGrid* p, SymbolGrid* received_out) {
            jscc::GopBuffer txb, rxb;
            const auto tx = attack::run_transmission(codec, x, txb, rxb, cfg.ofdm, ht, ha, pre_noise,
                                                     pay_noise, perm, p);
            if (received_out != nullptr) *received_out = tx.eq_compact_raw;
            return metrics::psnr(x.vec(), tx.recon.vec());
        };
        const SymbolGrid zero(art.rows_total, cfg.ofdm.n_fft);
        acc.psnr_none += receive_metric(&zero, nullptr);
        acc.psnr_attacked += receive_metric(&pert, nullptr);

        // oracle defenders operate on the received full-band payload
        SymbolGrid y_full(rows, cfg.ofdm.n_fft);
        {
            jscc::GopBuffer tmp;
            const SymbolGrid pl = codec.encode(x, tmp);
            const SymbolGrid mp = map_constellation(pl, codec.spec().c);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < 48; ++j)
                    y_full.at(i, cfg.ofdm.data_subcarriers[perm[j]]) = mp.at(i, j);
                for (std::size_t k : cfg.ofdm.pilot_subcarriers) y_full.at(i, k) = phy::cd{1.0, 0.0};
            }
        }
        const SymbolGrid received =
            attack::inject(y_full, ht.freq_response, ha.freq_response, pert, pay_noise);
        const SymbolGrid clean_rx = phy::apply_channel_with_noise(y_full, ht, pay_noise);

        auto decode_received = [&](const SymbolGrid& rx_grid) {
            const SymbolGrid rx_pre = phy::apply_channel_with_noise(cfg.ofdm.preamble, ht, pre_noise);
            const auto h_est = phy::ls_estimate(rx_pre, cfg.ofdm);
            const auto eq = phy::equalize(rx_grid, h_est, cfg.ofdm);
            SymbolGrid compact(rows, 48);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < 48; ++j)
                    compact.at(i, j) = eq.grid.at(i, cfg.ofdm.data_subcarriers[perm[j]]);
            jscc::GopBuffer rxb;
            return metrics::psnr(x.vec(), codec.decode(compact, rxb).vec());
        };

        RngStream guess = def_rng.derive("guess");
        const SymbolGrid synced = defense::oracle_defend(received, delta, tau, ha.freq_response,
                                                         true, guess, cfg.ofdm.symbol_len());
        acc.psnr_synced += decode_received(synced);
        const SymbolGrid unsynced = defense::oracle_defend(received, delta, tau, ha.freq_response,
                                                           false, guess, cfg.ofdm.symbol_len());
        acc.psnr_unsynced += decode_received(unsynced);

        // independent-parameter subtraction
        const nn::Tensor z_def = defender.draw_latent(guess);
        attack::TransformParams tau_def = attack::draw_tau(guess, cfg.mu, eps, cfg.ofdm.symbol_len());
        const SymbolGrid subtracted =
            defense::perturbation_subtract(received, defender, z_def, tau_def, ha.freq_response);
        acc.psnr_subtract += decode_received(subtracted);
        double atk_p = 0.0, res_p = 0.0;
        for (std::size_t i = 0; i < received.size(); ++i) {
            atk_p += std::norm(received[i] - clean_rx[i]);
            res_p += std::norm(subtracted[i] - clean_rx[i]);
        }
        acc.attack_power += atk_p;
        acc.residual_power += res_p;
    }
    const double n = static_cast<double>(trials);
    acc.psnr_none /= n;
    acc.psnr_attacked /= n;
    acc.psnr_synced /= n;
    acc.psnr_unsynced /= n;
    acc.psnr_subtract /= n;
    acc.attack_power /= n;
    acc.residual_power /= n;
    return acc;
}

std::vector<CsvRow> stage_defend(const ExperimentConfig& cfg) {
    std::vector<CsvRow> rows;
    fs::create_directories(checkpoint_dir(cfg));
    const auto attacker = load_pgm(cfg, "pgm_stealth");
    // defender: same architecture, independent parameters, surrogate data
    const std::string def_path = checkpoint_dir(cfg) + "/pgm_defender.bin";
    std::unique_ptr<attack::Pgm> defender;
    if (fs::exists(def_path)) {
        defender = load_pgm(cfg, "pgm_defender");
    } else {
        defender =
            std::make_unique<attack::Pgm>(pgm_config(cfg), derived_seed(cfg.seed, "init:pgm_defender"));
        attack::Discriminator disc(32, derived_seed(cfg.seed, "init:disc_defender"));
        const auto ensemble = load_surrogate_ensemble(cfg);
        const auto data = attack_data(cfg, "defender", 64);
        attack::AttackTrainConfig ac = attack_train_config(cfg);
        ac.epochs = cfg.defender_pgm_epochs;
        ac.downstream = false;
        ac.seed = derived_seed(cfg.seed, "train:pgm_defender");
        attack::train_pgm(*defender, disc, ensemble, data, {}, ac);
        save_checkpoint(defender->params().to_tensors(), def_path);
    }
    if (attacker->arch_descriptor() != defender->arch_descriptor())
        throw StageError("defend: defender architecture must match the attacker's");

    const auto codec = load_codec(cfg, CodecSpec{Modality::Image, cfg.constellations.front(),
                                                 cfg.rate_denoms.front(), ArchVariant::Target});
    for (double psr : cfg.downstream_psr_list) {
        const auto stats =
            run_defense_trials(cfg, *codec, *attacker, *defender, psr, cfg.defense_trials);
        auto emit = [&](const std::string& defense, const std::string& metric, double value) {
            CsvRow r;
            r.stage = "defend";
            r.scenario = cfg.scenario;
            r.seed = cfg.seed;
            r.config_hash = cfg.config_hash();
            r.codec = defense;
            r.modality = "image";
            r.psr_db = psr;
            r.arm = "trained-pgm";
            r.metric = metric;
            r.value = value;
            r.trials = cfg.defense_trials;
            rows.push_back(r);
        };
        emit("none", "psnr_db", stats.psnr_none);
        emit("no-defense", "psnr_db", stats.psnr_attacked);
        emit("oracle-synced", "psnr_db", stats.psnr_synced);
        emit("oracle-unsynced", "psnr_db", stats.psnr_unsynced);
        emit("subtraction", "psnr_db", stats.psnr_subtract);
        emit("subtraction", "attack_power", stats.attack_power);
        emit("subtraction", "residual_power", stats.residual_power);
    }
    return rows;
}

std::vector<CsvRow> stage_detect(const ExperimentConfig& cfg) {
    std::vector<CsvRow> rows;
    const auto codec = load_codec(cfg, CodecSpec{Modality::Image, cfg.constellations.front(),
                                                 cfg.rate_denoms.front(), ArchVariant::Target});
    const auto defender = load_pgm(cfg, "pgm_defender");
    std::vector<std::pair<std::string, std::string>> variants = {{"pgm_stealth", "stealth"}};
    if (fs::exists(checkpoint_dir(cfg) + "/pgm_nonstealth.bin"))
        variants.push_back({"pgm_nonstealth", "nonstealth"});

    const auto images =
        synth_images(cfg.detector_samples, derived_seed(cfg.seed, "data:image:detect"));
    const double nv = std::pow(10.0, -cfg.channel.snr_db / 10.0);
    const std::size_t rows_n = codec.get()->payload_rows();

    auto collect = [&](const attack::Pgm* pgm, const std::string& label, double psr,
                       std::vector<SymbolGrid>& clean_out, std::vector<SymbolGrid>& pert_out) {
        attack::AttackArtifacts art;
        art.pgm = pgm;
        art.mu = cfg.mu;
        art.rows_total = cfg.rows_total();
        art.shuffle_domain = &cfg.ofdm.data_subcarriers;
        RngStream root(derived_seed(cfg.seed, "detect:" + label));
        for (std::size_t i = 0; i < cfg.detector_samples; ++i) {
            RngStream s = root.derive(i);
            const nn::Tensor& x = images[i % images.size()];
            RngStream ht_rng = s.derive("ht"), ha_rng = s.derive("ha"), noise_rng = s.derive("noise");
            RngStream perm_rng = s.derive("perm"), pert_rng = s.derive("pert");
            const auto ht = sample_channel(ht_rng, cfg.channel, cfg.ofdm.n_fft);
            const auto ha = sample_channel(ha_rng, cfg.channel, cfg.ofdm.n_fft);
            const SymbolGrid pre_noise = phy::draw_noise(1, cfg.ofdm.n_fft, nv, noise_rng);
            const SymbolGrid pay_noise = phy::draw_noise(rows_n, cfg.ofdm.n_fft, nv, noise_rng);
            std::vector<std::size_t> perm(48);
            std::iota(perm.begin(), perm.end(), 0);
            for (std::size_t k = perm.size(); k > 1; --k)
                std::swap(perm[k - 1], perm[perm_rng.uniform_int(k)]);
            const auto draws = attack::draw_perturbation_inputs(pert_rng, art, cfg.ofdm);
            jscc::GopBuffer b;
            const SymbolGrid payload = codec->encode(x, b);
            const double vp =
                attack::full_band_power(map_constellation(payload, codec->spec().c), cfg.ofdm);
            const SymbolGrid pert = attack::build_perturbation(
                attack::Arm::TrainedPgm, art, draws, attack::psr_to_epsilon_power(vp, psr));
            jscc::GopBuffer txb, rxb, txb2, rxb2;
            const SymbolGrid zero(art.rows_total, cfg.ofdm.n_fft);
            clean_out.push_back(attack::run_transmission(*codec, x, txb, rxb, cfg.ofdm, ht, ha,
                                                         pre_noise, pay_noise, perm, &zero)
                                    .eq_compact_mapped);
            pert_out.push_back(attack::run_transmission(*codec, x, txb2, rxb2, cfg.ofdm, ht, ha,
                                                        pre_noise, pay_noise, perm, &pert)
                                   .eq_compact_mapped);
        }
    };

    const double psr = cfg.downstream_psr_list.front();
    for (const auto& [name, label] : variants) {
        const auto pgm = load_pgm(cfg, name);
        // offline corpus from the defender's own generator
        std::vector<SymbolGrid> off_clean, off_pert;
        collect(defender.get(), label + ":offline", psr, off_clean, off_pert);
        defense::Detector det(32, derived_seed(cfg.seed, "init:detector:" + label));
        defense::DetectorTrainConfig dc;
        dc.epochs = cfg.detector_epochs;
        dc.seed = derived_seed(cfg.seed, "train:detector:" + label);
        defense::train_detector(det, off_clean, off_pert, dc);
        // online fine-tuning and held-out scoring on the actual attack
        std::vector<SymbolGrid> on_clean, on_pert;
        collect(pgm.get(), label + ":online", psr, on_clean, on_pert);
        const std::size_t half = on_clean.size() / 2;
        std::vector<SymbolGrid> ft_clean(on_clean.begin(), on_clean.begin() + half);
        std::vector<SymbolGrid> ft_pert(on_pert.begin(), on_pert.begin() + half);
        defense::fine_tune(det, ft_clean, ft_pert, dc);
        std::vector<double> pos, neg;
        for (std::size_t i = half; i < on_clean.size(); ++i) {
            neg.push_back(det.score(on_clean[i]));
            pos.push_back(det.score(on_pert[i]));
        }
        CsvRow r;
        r.stage = "detect";
        r.scenario = cfg.scenario;
        r.seed = cfg.seed;
        r.config_hash = cfg.config_hash();
        r.codec = name;
        r.psr_db = psr;
        r.metric = "auc";
        r.value = metrics::auc_roc(pos, neg);
        r.trials = pos.size();
        rows.push_back(r);
    }
    return rows;
}

std::vector<CsvRow> stage_report(const ExperimentConfig& cfg) {
    json summary;
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(cfg.config_hash()));
    summary["config_hash"] = hash;
    summary["seed"] = cfg.seed;
    summary["scenario"] = cfg.scenario;
    json checkpoints = json::object();
    if (fs::exists(checkpoint_dir(cfg)))
        for (const auto& entry : fs::directory_iterator(checkpoint_dir(cfg))) {
            char h[32];
            std::snprintf(h, sizeof(h), "%016llx",
                          static_cast<unsigned long long>(file_content_hash(entry.path().string())));
            checkpoints[entry.path().filename().string()] = h;
        }
    summary["checkpoints"] = checkpoints;
    json stages = json::object();
    for (const char* stage : {"synth-data", "train-jscc", "train-downstream", "train-pgm",
                              "attack-sweep", "defend", "detect"}) {
        const std::string path = cfg.out_dir + "/" + stage + ".csv";
        if (!fs::exists(path)) continue;
        std::ifstream f(path);
        std::string line;
        std::size_t count = 0;
        while (std::getline(f, line)) ++count;
        stages[stage] = count > 0 ? count - 1 : 0;
    }
    summary["stage_rows"] = stages;
    summary["wall_clock_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    std::ofstream f(cfg.out_dir + "/summary.json", std::ios::trunc);
    if (!f) throw StageError("cannot write summary");
    f << summary.dump(2) << "\n";
    return {};
}

} // namespace

std::vector<CsvRow> run_stage(const ExperimentConfig& cfg, const std::string& stage) {
    fs::create_directories(cfg.out_dir);
    if (stage == "synth-data") return stage_synth_data(cfg);
    if (stage == "train-jscc") return stage_train_jscc(cfg);
    if (stage == "train-downstream") return stage_train_downstream(cfg);
    if (stage == "train-pgm") return stage_train_pgm(cfg);
    if (stage == "attack-sweep") return stage_attack_sweep(cfg);
    if (stage == "defend") return stage_defend(cfg);
    if (stage == "detect") return stage_detect(cfg);
    if (stage == "report") return stage_report(cfg);
    throw ConfigError("unknown stage: " + stage);
}

void run_experiment(const ExperimentConfig& cfg, const std::vector<std::string>& stages) {
    cfg.validate();
    for (const auto& stage : stages) {
        const auto rows = run_stage(cfg, stage);
        if (stage != "report") write_csv(cfg.out_dir + "/" + stage + ".csv", rows);
    }
}

} // namespace wsim::harness
