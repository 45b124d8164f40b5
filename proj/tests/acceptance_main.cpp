// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each numbered criterion prints exactly one
// PASS/FAIL line; the binary exits nonzero if any criterion fails. Trained
// artifacts are cached under acceptance_run/ and reused on reruns.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "wsim/defense.hpp"
#include "wsim/experiment.hpp"
#include "wsim/metrics.hpp"

using namespace wsim;
using namespace wsim::harness;
using attack::Arm;
using jscc::ArchVariant;
using jscc::CodecSpec;
using jscc::JsccCodec;
using jscc::Modality;
using nn::Tensor;
using phy::cd;
using phy::SymbolGrid;

namespace {

namespace fs = std::filesystem;

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool g_all_ok = true;

void report(int id, const char* name, bool ok, double seconds) {
    std::printf("criterion %d [%-20s] %s  (%.1f s)\n", id, name, ok ? "PASS" : "FAIL", seconds);
    std::fflush(stdout);
    g_all_ok = g_all_ok && ok;
}

SymbolGrid random_grid(std::size_t rows, std::size_t cols, RngStream& rng) {
    SymbolGrid g(rows, cols);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return g;
}

// payload-only time rendering (cyclic prefix stripped); the unitary modem
// makes its power equal to the frequency-domain power
phy::TimeSignal payload_time(const SymbolGrid& grid, const phy::OfdmConfig& ofdm) {
    const phy::TimeSignal with_cp = ofdm_modulate(grid, ofdm);
    phy::TimeSignal out;
    out.reserve(grid.rows() * ofdm.n_fft);
    for (std::size_t r = 0; r < grid.rows(); ++r)
        for (std::size_t n = 0; n < ofdm.n_fft; ++n)
            out.push_back(with_cp[r * ofdm.symbol_len() + ofdm.cp_len + n]);
    return out;
}

// one-sided paired test of mean(a - b) > 0, normal approximation
double paired_p_greater(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n - 1);
    if (var <= 0.0) return mean > 0.0 ? 0.0 : 1.0;
    const double t = mean / std::sqrt(var / static_cast<double>(n));
    return 0.5 * std::erfc(t / std::sqrt(2.0));
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ---- criterion 1 ----

bool physical_layer_exactness() {
    const phy::OfdmConfig ofdm = phy::default_ofdm_config();
    RngStream rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        const SymbolGrid g = random_grid(1 + trial % 3, 64, rng);
        const SymbolGrid back = ofdm_demodulate(ofdm_modulate(g, ofdm), ofdm);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (std::abs(back[i] - g[i]) > 1e-9) return false;
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const SymbolGrid g = random_grid(2, 64, rng);
        const double freq_power = g.power();
        const double time_power = phy::signal_power(payload_time(g, ofdm));
        if (std::fabs(freq_power - time_power) > 1e-9 * std::max(1.0, freq_power)) return false;
    }
    phy::ChannelModel model;
    model.snr_db = 400.0; // noiseless
    for (int trial = 0; trial < 1000; ++trial) {
        const auto ch = sample_channel(rng, model, 64);
        const SymbolGrid y = random_grid(2, 64, rng);
        const SymbolGrid rx = apply_channel(y, ch, rng);
        const SymbolGrid rx_pre = apply_channel(ofdm.preamble, ch, rng);
        const auto eq = equalize(rx, ls_estimate(rx_pre, ofdm), ofdm);
        for (std::size_t r = 0; r < y.rows(); ++r)
            for (std::size_t k : ofdm.data_subcarriers)
                if (std::abs(eq.grid.at(r, k) - y.at(r, k)) > 1e-9) return false;
    }
    return true;
}

// ---- criterion 2 ----

bool fd_primitive_battery() {
    using namespace wsim::nn;
    RngStream rng(202);
    auto rand_t = [&](std::vector<std::size_t> shape) {
        Tensor t(std::move(shape));
        for (auto& v : t.vec()) {
            const double mag = rng.uniform(0.1, 1.0);
            v = rng.uniform() < 0.5 ? -mag : mag;
        }
        return t;
    };
    auto rand_pos = [&](std::vector<std::size_t> shape) {
        Tensor t(std::move(shape));
        for (auto& v : t.vec()) v = rng.uniform(0.5, 1.5);
        return t;
    };
    int graphs = 0;
    for (int iter = 0; iter < 120; ++iter) {
        ParamStore store;
        Tape t;
        Var out{nullptr, -1};
        switch (iter % 12) {
            case 0: { // add, sub, mul, neg, mean
                Parameter& a = store.create("a", {3, 3});
                Parameter& b = store.create("b", {3, 3});
                a.value = rand_t({3, 3});
                b.value = rand_t({3, 3});
                out = mean(mul(add(t.param(a), t.param(b)), sub(t.param(a), neg(t.param(b)))));
                break;
            }
            case 1: { // matmul, add_row, tanh
                Parameter& w = store.create("w", {3, 2});
                Parameter& b = store.create("b", {2});
                w.value = rand_t({3, 2});
                b.value = rand_t({2});
                out = mean(tanh_(add_row(matmul(t.constant(rand_t({2, 3})), t.param(w)), t.param(b))));
                break;
            }
            case 2: { // relu, scale, add_scalar, sum
                Parameter& a = store.create("a", {6});
                a.value = rand_t({6});
                out = sum(relu(scale(add_scalar(t.param(a), 0.2), -1.3)));
                break;
            }
            case 3: { // sqrt, recip, exp, log
                Parameter& a = store.create("a", {5});
                a.value = rand_pos({5});
                out = sum(sqrt_(recip(exp_(log_(t.param(a))))));
                break;
            }
            case 4: { // mean_abs, abs, sigmoid
                Parameter& a = store.create("a", {6});
                a.value = rand_t({6});
                out = add(mean_abs(t.param(a)), sum(abs_(sigmoid(t.param(a)))));
                break;
            }
            case 5: { // conv2d (strides 1 and 2), upsample
                Parameter& x = store.create("x", {2, 5, 5});
                Parameter& w = store.create("w", {2, 2, 3, 3});
                Parameter& b = store.create("b", {2});
                x.value = rand_t({2, 5, 5});
                w.value = rand_t({2, 2, 3, 3});
                b.value = rand_t({2});
                Var h = conv2d(t.param(x), t.param(w), t.param(b), 2, PadMode::Same);
                out = mean(conv2d(upsample2x(h), t.param(w), t.param(b), 1, 2, PadMode::Same));
                break;
            }
            case 6: { // concat, slice_rows, reshape
                Parameter& a = store.create("a", {2, 4});
                Parameter& b = store.create("b", {3, 4});
                a.value = rand_t({2, 4});
                b.value = rand_t({3, 4});
                out = mean(reshape(slice_rows(concat0(t.param(a), t.param(b)), 1, 4), {12}));
                break;
            }
            case 7: { // select_cols, cmul, conj
                Parameter& a = store.create("a", {3, 5, 2});
                a.value = rand_t({3, 5, 2});
                out = mean(cmul(select_cols(t.param(a), {4, 0, 2}),
                                conj_(t.constant(rand_t({3, 3, 2})))));
                break;
            }
            case 8: { // softmax, softmax_xent
                Parameter& a = store.create("a", {3, 4});
                a.value = rand_t({3, 4});
                Tensor onehot({3, 4});
                for (int r = 0; r < 3; ++r) onehot[r * 4 + r] = 1.0;
                out = add(softmax_xent(t.param(a), t.constant(onehot)),
                          mean(mul(softmax_rows(t.param(a)), t.constant(rand_t({3, 4})))));
                break;
            }
            case 9: { // mse, scale_by
                Parameter& a = store.create("a", {7});
                Parameter& b = store.create("b", {7});
                Parameter& s = store.create("s", {1});
                a.value = rand_t({7});
                b.value = rand_t({7});
                s.value = rand_pos({1});
                out = add(mse(t.param(a), t.param(b)), mean(scale_by(t.param(a), t.param(s))));
                break;
            }
            case 10: { // at, max_except
                Parameter& a = store.create("a", {6});
                a.value = rand_t({6});
                out = sub(at(t.param(a), 2), max_except(t.param(a), 2));
                break;
            }
            default: { // channels_last, swap01
                Parameter& a = store.create("a", {3, 2, 4});
                a.value = rand_t({3, 2, 4});
                out = mean(mul(swap01(channels_last(t.param(a))), t.constant(rand_t({4, 2, 3}))));
                break;
            }
        }
        ++graphs;
        if (t.finite_diff_check(out, 1e-5) >= 1e-4) return false;
    }
    return graphs >= 100;
}

bool autodiff_soundness() {
    if (!fd_primitive_battery()) return false;
    // miniature end-to-end attack graph: generator -> transformation ->
    // channel mix -> linear receiver -> distortion plus discrimination terms
    attack::PgmConfig pc;
    pc.latent_dim = 8;
    pc.n_g = 2;
    pc.n_fft = 16;
    pc.base_channels = 3;
    pc.res_blocks = 1;
    attack::Pgm pgm(pc, 11);
    attack::Discriminator disc(4, 13);
    RngStream rng(203);
    const Tensor z = pgm.draw_latent(rng);
    attack::TransformParams tau;
    tau.mu = 2;
    tau.zeta = 5;
    tau.epsilon = 0.6;
    tau.phi = 0.4;
    tau.delta_t = 2;

    auto rand_t = [&](std::vector<std::size_t> shape, double mag) {
        Tensor t(std::move(shape));
        for (auto& v : t.vec()) v = rng.uniform(-mag, mag);
        return t;
    };
    nn::Tape t;
    nn::Var delta = pgm.build(t, t.constant(z));
    nn::Var transformed = attack::apply_transform_var(t, delta, tau);
    nn::Var received =
        add(cmul(transformed, t.constant(rand_t({4, 16, 2}, 1.0))), t.constant(rand_t({4, 16, 2}, 1.0)));
    nn::Var recon = matmul(reshape(received, {1, 128}), t.constant(rand_t({128, 16}, 0.3)));
    nn::Var distortion = mse(recon, t.constant(rand_t({1, 16}, 0.5)));
    // tile the 16 columns to the 48-wide discriminator input
    nn::Var flat = reshape(received, {64, 2});
    nn::Var disc_in = reshape(concat0(concat0(flat, flat), flat), {4, 48, 2});
    nn::Var p = disc.score(t, disc_in);
    nn::Var objective = add(distortion, log_(add_scalar(scale(p, 0.999), 5e-4)));
    return t.finite_diff_check(objective, 1e-5) < 1e-3;
}

// ---- criterion 3 ----

bool power_and_stealth_budget(const ExperimentConfig& cfg) {
    const auto pgm = load_pgm(cfg, "pgm_stealth");
    const auto codec = load_codec(
        cfg, CodecSpec{Modality::Image, cfg.constellations.front(), cfg.rate_denoms.front(),
                       ArchVariant::Target});
    const auto images = synth_images(4, derived_seed(cfg.seed, "data:image:budget"));
    RngStream rng(303);
    // fixed victim per image, full-band with pilots and a random interleave
    std::vector<SymbolGrid> victims;
    std::vector<double> victim_powers;
    std::vector<phy::TimeSignal> victim_times;
    for (const auto& x : images) {
        jscc::GopBuffer buf;
        const SymbolGrid mapped = map_constellation(codec->encode(x, buf), codec->spec().c);
        SymbolGrid full(mapped.rows(), cfg.ofdm.n_fft);
        for (std::size_t i = 0; i < mapped.rows(); ++i) {
            for (std::size_t j = 0; j < 48; ++j)
                full.at(i, cfg.ofdm.data_subcarriers[j]) = mapped.at(i, j);
            for (std::size_t k : cfg.ofdm.pilot_subcarriers) full.at(i, k) = cd{1.0, 0.0};
        }
        victims.push_back(full);
        victim_times.push_back(payload_time(full, cfg.ofdm));
        victim_powers.push_back(phy::signal_power(victim_times.back()));
    }
    for (int draw = 0; draw < 10000; ++draw) {
        const std::size_t vi = draw % victims.size();
        const double psr = rng.uniform(-20.0, -10.0);
        const double eps = attack::psr_to_epsilon(victim_times[vi], psr);
        const Tensor z = pgm->draw_latent(rng);
        const attack::TransformParams tau =
            attack::draw_tau(rng, cfg.mu, eps, cfg.ofdm.symbol_len());
        const SymbolGrid transformed = attack::apply_transform(pgm->generate(z), tau);
        if (transformed.power() > eps * (1.0 + 1e-9)) return false;
        // injected rows only
        SymbolGrid trunc(victims[vi].rows(), cfg.ofdm.n_fft);
        for (std::size_t i = 0; i < trunc.size(); ++i) trunc[i] = transformed[i];
        const double injected = phy::signal_power(payload_time(trunc, cfg.ofdm));
        if (injected > 0.0) {
            const double measured = 10.0 * std::log10(injected / victim_powers[vi]);
            if (measured > psr + 1e-6) return false;
        }
    }
    return true;
}

// ---- criterion 4 ----

bool transform_algebra() {
    RngStream rng(404);
    // exhaustive small-grid checks
    const SymbolGrid d8 = random_grid(8, 8, rng);
    for (std::size_t mu = 1; mu <= 4; ++mu) {
        const SymbolGrid e = attack::symbol_extend(d8, mu);
        if (e.rows() != 8 * mu) return false;
        for (std::size_t r = 0; r < e.rows(); ++r)
            for (std::size_t c = 0; c < 8; ++c)
                if (e.at(r, c) != d8.at(r % 8, c)) return false;
    }
    for (std::uint64_t zeta = 0; zeta < 256; ++zeta) {
        const auto perm = attack::shuffle_permutation(zeta, 8);
        std::vector<bool> seen(8, false);
        for (std::size_t p : perm) {
            if (p >= 8 || seen[p]) return false;
            seen[p] = true;
        }
        const SymbolGrid s = attack::symbol_shuffle(d8, perm);
        const SymbolGrid back = attack::symbol_shuffle(s, attack::invert_permutation(perm));
        for (std::size_t i = 0; i < d8.size(); ++i)
            if (back[i] != d8[i]) return false;
    }
    for (int dt = 0; dt < 12; ++dt)
        for (double phi : {0.0, 0.9, M_PI, 5.1}) {
            const SymbolGrid r = attack::rotate(d8, phi, dt);
            for (std::size_t i = 0; i < d8.size(); ++i)
                if (std::fabs(std::abs(r[i]) - std::abs(d8[i])) > 1e-12) return false;
        }
    // randomized full-width checks incl. the composed transformation
    for (int trial = 0; trial < 1000; ++trial) {
        const SymbolGrid d = random_grid(3, 64, rng);
        attack::TransformParams tau;
        tau.mu = 1 + rng.uniform_int(3);
        tau.zeta = rng.next_u64();
        tau.epsilon = rng.uniform(0.05, 3.0);
        tau.phi = rng.uniform(0.0, 2.0 * M_PI);
        tau.delta_t = static_cast<int>(rng.uniform_int(80));
        const SymbolGrid got = attack::apply_transform(d, tau);
        SymbolGrid manual = attack::symbol_extend(d, tau.mu);
        manual = attack::symbol_shuffle(manual, attack::shuffle_permutation(*tau.zeta, 64));
        manual = attack::power_normalize(manual, tau.epsilon);
        manual = attack::rotate(manual, tau.phi, tau.delta_t);
        if (got.rows() != manual.rows()) return false;
        for (std::size_t i = 0; i < got.size(); ++i)
            if (std::abs(got[i] - manual[i]) > 1e-12) return false;
        if (got.power() > tau.epsilon * (1.0 + 1e-9)) return false;
    }
    return true;
}

// ---- artifact setup ----

void ensure_artifacts(const ExperimentConfig& cfg) {
    const std::string dir = checkpoint_dir(cfg);
    const bool have =
        fs::exists(dir + "/pgm_stealth.bin") && fs::exists(dir + "/pgm_nonstealth.bin") &&
        fs::exists(dir + "/vanilla_uap.bin") &&
        fs::exists(codec_checkpoint_path(
            cfg, CodecSpec{Modality::Text, cfg.constellations.front(), cfg.rate_denoms.front(),
                           ArchVariant::Target})) &&
        fs::exists(dir + "/clf_ave_target.bin");
    if (have) {
        std::printf("setup: reusing artifacts in %s\n", cfg.out_dir.c_str());
        return;
    }
    for (const char* stage : {"train-jscc", "train-downstream", "train-pgm"}) {
        const double t0 = now_s();
        std::printf("setup: running %s ...\n", stage);
        std::fflush(stdout);
        const auto rows = run_stage(cfg, stage);
        write_csv(cfg.out_dir + "/" + std::string(stage) + ".csv", rows);
        std::printf("setup: %s done (%.1f s)\n", stage, now_s() - t0);
    }
}

// ---- criteria 5 and 6 ----

struct OrderingOutcome {
    bool ordering_ok = true;       // criterion 5
    bool transfer_ok = true;       // criterion 6
    bool arch_distinct = true;
};

OrderingOutcome attack_ordering(const ExperimentConfig& cfg) {
    OrderingOutcome out;
    const auto pgm = load_pgm(cfg, "pgm_stealth");
    const SymbolGrid vanilla = load_vanilla(cfg);
    attack::AttackArtifacts art;
    art.pgm = pgm.get();
    art.vanilla = &vanilla;
    art.mu = cfg.mu;
    art.rows_total = cfg.rows_total();
    art.shuffle_domain = &cfg.ofdm.data_subcarriers;
    attack::SweepConfig sc;
    sc.psr_list = cfg.psr_list;
    sc.trials = cfg.sweep_trials;
    sc.ofdm = cfg.ofdm;
    sc.channel = cfg.channel;
    sc.seed = derived_seed(cfg.seed, "acceptance-sweep");
    const auto eval_data = attack_data(cfg, "eval", std::max<std::size_t>(cfg.sweep_trials / 2, 16));
    const std::vector<Arm> arms = {Arm::None, Arm::Random, Arm::Vanilla, Arm::TrainedPgm};

    for (Modality q : cfg.modalities) {
        const CodecSpec tspec{q, cfg.constellations.front(), cfg.rate_denoms.front(),
                              ArchVariant::Target};
        auto target = load_codec(cfg, tspec);
        attack::freeze_codec(*target);
        // the surrogate the attacker trained on must differ architecturally
        const CodecSpec sspec{q, cfg.constellations.front(), cfg.rate_denoms.front(),
                              ArchVariant::Narrow};
        if (build_codec(cfg, sspec)->arch_descriptor() == target->arch_descriptor())
            out.arch_distinct = false;

        const auto sweep = attack::sweep_modality(*target, eval_data, art, sc, arms);
        for (double psr : cfg.psr_list) {
            const auto& by_arm = sweep.metric.at(psr);
            const auto deg_pgm = attack::degradation(q, by_arm.at(Arm::None), by_arm.at(Arm::TrainedPgm));
            const auto deg_van = attack::degradation(q, by_arm.at(Arm::None), by_arm.at(Arm::Vanilla));
            const auto deg_rnd = attack::degradation(q, by_arm.at(Arm::None), by_arm.at(Arm::Random));
            const double p1 = paired_p_greater(deg_pgm, deg_van);
            const double p2 = paired_p_greater(deg_van, deg_rnd);
            const bool mean_order = mean_of(deg_pgm) > mean_of(deg_van) &&
                                    mean_of(deg_van) > mean_of(deg_rnd);
            const bool ok = mean_order && p1 < 0.01 && p2 < 0.01;
            std::printf("  ordering %-6s psr %+4.0f: pgm %.4f vanilla %.4f random %.4f  "
                        "p(pgm>van)=%.2e p(van>rnd)=%.2e %s\n",
                        jscc::modality_name(q), psr, mean_of(deg_pgm), mean_of(deg_van),
                        mean_of(deg_rnd), p1, p2, ok ? "ok" : "VIOLATION");
            std::fflush(stdout);
            out.ordering_ok = out.ordering_ok && ok;
            if (psr == -10.0) out.transfer_ok = out.transfer_ok && mean_of(deg_pgm) > mean_of(deg_rnd);
        }
    }
    out.transfer_ok = out.transfer_ok && out.arch_distinct;
    return out;
}

// ---- criterion 7 ----

bool downstream_criterion(const ExperimentConfig& cfg) {
    const auto pgm = load_pgm(cfg, "pgm_stealth");
    const SymbolGrid vanilla = load_vanilla(cfg);
    attack::AttackArtifacts art;
    art.pgm = pgm.get();
    art.vanilla = &vanilla;
    art.mu = cfg.mu;
    art.rows_total = cfg.rows_total();
    art.shuffle_domain = &cfg.ofdm.data_subcarriers;
    attack::SweepConfig sc;
    sc.ofdm = cfg.ofdm;
    sc.channel = cfg.channel;
    const std::vector<Arm> arms = {Arm::Random, Arm::TrainedPgm};
    const auto c0 = cfg.constellations.front();
    const int d0 = cfg.rate_denoms.front();
    bool ok = true;

    {
        auto clf = load_classifier(cfg, task::TaskKind::Vc, ArchVariant::Target);
        auto codec = load_codec(cfg, CodecSpec{Modality::Video, c0, d0, ArchVariant::Target});
        attack::freeze_codec(*codec);
        const auto clips =
            synth_vc(cfg.downstream_trials, derived_seed(cfg.seed, "data:vc:acceptance"));
        sc.seed = derived_seed(cfg.seed, "acceptance:vc");
        const auto eval = attack::eval_downstream_vc(*clf, *codec, clips, art, -10.0,
                                                     cfg.downstream_trials, sc, arms);
        std::printf("  vc success: pgm %.3f random %.3f, targeted agreement %s\n",
                    eval.untargeted_success.at(Arm::TrainedPgm),
                    eval.untargeted_success.at(Arm::Random),
                    eval.targeted_agreement ? "yes" : "NO");
        ok = ok && eval.untargeted_success.at(Arm::TrainedPgm) >
                       eval.untargeted_success.at(Arm::Random) &&
             eval.targeted_agreement;
    }
    {
        auto clf = load_classifier(cfg, task::TaskKind::Ave, ArchVariant::Target);
        auto icodec = load_codec(cfg, CodecSpec{Modality::Image, c0, d0, ArchVariant::Target});
        auto scodec = load_codec(cfg, CodecSpec{Modality::Speech, c0, d0, ArchVariant::Target});
        attack::freeze_codec(*icodec);
        attack::freeze_codec(*scodec);
        const auto pairs =
            synth_ave(cfg.downstream_trials, derived_seed(cfg.seed, "data:ave:acceptance"));
        sc.seed = derived_seed(cfg.seed, "acceptance:ave");
        const auto eval = attack::eval_downstream_ave(*clf, *icodec, *scodec, pairs, art, -10.0,
                                                      cfg.downstream_trials, sc, arms);
        std::printf("  ave success: pgm %.3f random %.3f, targeted agreement %s\n",
                    eval.untargeted_success.at(Arm::TrainedPgm),
                    eval.untargeted_success.at(Arm::Random),
                    eval.targeted_agreement ? "yes" : "NO");
        ok = ok && eval.untargeted_success.at(Arm::TrainedPgm) >
                       eval.untargeted_success.at(Arm::Random) &&
             eval.targeted_agreement;
    }
    return ok;
}

// ---- criterion 8 ----

struct ModalityDefenseStats {
    double metric_none = 0.0, metric_synced = 0.0;
    std::vector<double> deg_synced, deg_unsynced;
};

// per-trial transmissions with the attack applied and the two oracle
// defenses evaluated on the same draws
ModalityDefenseStats oracle_defense_trials(const ExperimentConfig& cfg, const JsccCodec& codec,
                                           const attack::Pgm& attacker, std::size_t trials,
                                           double psr) {
    ModalityDefenseStats stats;
    const Modality q = codec.spec().q;
    RngStream root(derived_seed(cfg.seed, std::string("acceptance:oracle:") +
                                              jscc::modality_name(q)));
    attack::AttackArtifacts art;
    art.pgm = &attacker;
    art.mu = cfg.mu;
    art.rows_total = cfg.rows_total();
    art.shuffle_domain = &cfg.ofdm.data_subcarriers;
    const double nv = std::pow(10.0, -cfg.channel.snr_db / 10.0);
    const std::size_t rows = codec.payload_rows();
    const auto eval_data = attack_data(cfg, "defense-eval", std::max<std::size_t>(trials / 2, 8));

    std::vector<double> m_none, m_synced, m_unsynced;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        RngStream s = root.derive(trial);
        RngStream ht_rng = s.derive("ht"), ha_rng = s.derive("ha"), noise_rng = s.derive("noise");
        RngStream perm_rng = s.derive("perm"), pert_rng = s.derive("pert"), guess_rng = s.derive("g");
        const auto ht = sample_channel(ht_rng, cfg.channel, cfg.ofdm.n_fft);
        const auto ha = sample_channel(ha_rng, cfg.channel, cfg.ofdm.n_fft);

        // per-frame loop shares the structure across modalities; non-video
        // sources have one frame
        std::vector<Tensor> inputs;
        std::vector<int> sentence;
        switch (q) {
            case Modality::Image: inputs = {eval_data.images[trial % eval_data.images.size()]}; break;
            case Modality::Speech: {
                const Tensor& wave = eval_data.waves[trial % eval_data.waves.size()];
                const Tensor framed = jscc::speech_frame(wave, codec.framing());
                inputs = {Tensor({1, 16, 64}, framed.vec())};
                break;
            }
            case Modality::Text: {
                sentence = eval_data.sentences[trial % eval_data.sentences.size()];
                inputs = {jscc::text_onehot(sentence, codec.vocab())};
                break;
            }
            case Modality::Video: {
                const auto& clip = eval_data.clips[trial % eval_data.clips.size()];
                for (std::size_t f = 0; f < harness::kGopSize && f < clip.frames.size(); ++f)
                    inputs.push_back(clip.frames[f]);
                break;
            }
        }

        jscc::GopBuffer tx_none, rx_none, tx_s, rx_s, tx_u, rx_u;
        std::vector<double> ref, got_none, got_synced, got_unsynced;
        Tensor logits_none, logits_synced, logits_unsynced;
        for (std::size_t f = 0; f < inputs.size(); ++f) {
            const SymbolGrid pre_noise = phy::draw_noise(1, cfg.ofdm.n_fft, nv, noise_rng);
            const SymbolGrid pay_noise = phy::draw_noise(rows, cfg.ofdm.n_fft, nv, noise_rng);
            std::vector<std::size_t> perm(48);
            std::iota(perm.begin(), perm.end(), 0);
            for (std::size_t i = perm.size(); i > 1; --i)
                std::swap(perm[i - 1], perm[perm_rng.uniform_int(i)]);
            const auto draws = attack::draw_perturbation_inputs(pert_rng, art, cfg.ofdm);

            jscc::GopBuffer probe = tx_s;
            const SymbolGrid probe_payload = codec.encode(inputs[f], probe);
            const double vp = attack::full_band_power(
                map_constellation(probe_payload, codec.spec().c), cfg.ofdm);
            const double eps = attack::psr_to_epsilon_power(vp, psr);
            attack::TransformParams tau;
            tau.mu = cfg.mu;
            tau.zeta = draws.zeta;
            tau.epsilon = eps;
            tau.phi = draws.phi;
            tau.delta_t = draws.delta_t;
            const SymbolGrid delta = attacker.generate(draws.z);
            const SymbolGrid pert = attack::apply_transform(delta, tau);
            const SymbolGrid zero(art.rows_total, cfg.ofdm.n_fft);

            const auto tx0 = attack::run_transmission(codec, inputs[f], tx_none, rx_none, cfg.ofdm,
                                                      ht, ha, pre_noise, pay_noise, perm, &zero);

            // defended receptions: rebuild the received grid, subtract, decode
            auto defended_metric = [&](bool synced, jscc::GopBuffer& txb, jscc::GopBuffer& rxb,
                                       std::vector<double>& sink, Tensor* logits_sink) {
                jscc::GopBuffer tmp = txb;
                const SymbolGrid payload = codec.encode(inputs[f], txb);
                (void)tmp;
                const SymbolGrid mapped = map_constellation(payload, codec.spec().c);
                SymbolGrid y_full(rows, cfg.ofdm.n_fft);
                for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t j = 0; j < 48; ++j)
                        y_full.at(i, cfg.ofdm.data_subcarriers[perm[j]]) = mapped.at(i, j);
                    for (std::size_t k : cfg.ofdm.pilot_subcarriers) y_full.at(i, k) = cd{1.0, 0.0};
                }
                const SymbolGrid received =
                    attack::inject(y_full, ht.freq_response, ha.freq_response, pert, pay_noise);
                const SymbolGrid defended = defense::oracle_defend(
                    received, delta, tau, ha.freq_response, synced, guess_rng, cfg.ofdm.symbol_len());
                const SymbolGrid rx_pre =
                    phy::apply_channel_with_noise(cfg.ofdm.preamble, ht, pre_noise);
                const auto eq = equalize(defended, ls_estimate(rx_pre, cfg.ofdm), cfg.ofdm);
                SymbolGrid compact(rows, 48);
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < 48; ++j)
                        compact.at(i, j) = eq.grid.at(i, cfg.ofdm.data_subcarriers[perm[j]]);
                const Tensor recon = codec.decode(compact, rxb);
                if (logits_sink != nullptr) *logits_sink = recon;
                sink.insert(sink.end(), recon.vec().begin(), recon.vec().end());
            };

            ref.insert(ref.end(), inputs[f].vec().begin(), inputs[f].vec().end());
            got_none.insert(got_none.end(), tx0.recon.vec().begin(), tx0.recon.vec().end());
            logits_none = tx0.recon;
            defended_metric(true, tx_s, rx_s, got_synced, &logits_synced);
            defended_metric(false, tx_u, rx_u, got_unsynced, &logits_unsynced);
        }
        double v_none = 0.0, v_synced = 0.0, v_unsynced = 0.0;
        switch (q) {
            case Modality::Image:
            case Modality::Video:
                v_none = metrics::psnr(ref, got_none);
                v_synced = metrics::psnr(ref, got_synced);
                v_unsynced = metrics::psnr(ref, got_unsynced);
                break;
            case Modality::Speech:
                v_none = metrics::mse_metric(ref, got_none);
                v_synced = metrics::mse_metric(ref, got_synced);
                v_unsynced = metrics::mse_metric(ref, got_unsynced);
                break;
            case Modality::Text: {
                auto bleu_of = [&](const Tensor& logits) {
                    const auto decoded = jscc::text_greedy_decode(logits, codec.vocab());
                    return decoded.empty() ? 0.0 : metrics::bleu(decoded, sentence);
                };
                v_none = bleu_of(logits_none);
                v_synced = bleu_of(logits_synced);
                v_unsynced = bleu_of(logits_unsynced);
                break;
            }
        }
        m_none.push_back(v_none);
        m_synced.push_back(v_synced);
        m_unsynced.push_back(v_unsynced);
    }
    stats.metric_none = mean_of(m_none);
    stats.metric_synced = mean_of(m_synced);
    stats.deg_synced = attack::degradation(q, m_none, m_synced);
    stats.deg_unsynced = attack::degradation(q, m_none, m_unsynced);
    return stats;
}

bool defense_criterion(const ExperimentConfig& cfg) {
    // the defend stage trains (or loads) the defender generator and the
    // detect stage reports the two detector aucs
    const auto defend_rows = run_stage(cfg, "defend");
    write_csv(cfg.out_dir + "/defend.csv", defend_rows);
    const auto attacker = load_pgm(cfg, "pgm_stealth");
    const auto defender = load_pgm(cfg, "pgm_defender");

    bool ok = true;
    // (a) synced oracle within 1%, (b) unsynced strictly worse
    for (Modality q : cfg.modalities) {
        const auto codec = load_codec(cfg, CodecSpec{q, cfg.constellations.front(),
                                                     cfg.rate_denoms.front(), ArchVariant::Target});
        attack::freeze_codec(*codec);
        const std::size_t trials = q == Modality::Video ? cfg.defense_trials / 4 : cfg.defense_trials;
        const auto stats = oracle_defense_trials(cfg, *codec, *attacker, trials, -10.0);
        const double rel =
            std::fabs(stats.metric_synced - stats.metric_none) / std::max(1e-12, std::fabs(stats.metric_none));
        const bool synced_ok = rel <= 0.01;
        const bool unsynced_ok = mean_of(stats.deg_unsynced) > mean_of(stats.deg_synced);
        std::printf("  oracle %-6s: none %.4f synced %.4f (rel %.5f) unsynced-deg %.4f %s\n",
                    jscc::modality_name(q), stats.metric_none, stats.metric_synced, rel,
                    mean_of(stats.deg_unsynced), synced_ok && unsynced_ok ? "ok" : "VIOLATION");
        std::fflush(stdout);
        ok = ok && synced_ok && unsynced_ok;
    }

    // (c) independent-parameter subtraction never reduces mean residual power
    {
        double attack_power = 0.0, residual_power = 0.0;
        for (const auto& row : defend_rows) {
            if (row.codec == "subtraction" && row.metric == "attack_power") attack_power = row.value;
            if (row.codec == "subtraction" && row.metric == "residual_power")
                residual_power = row.value;
        }
        std::printf("  subtraction: attack power %.4f residual %.4f\n", attack_power, residual_power);
        ok = ok && residual_power >= attack_power && attack_power > 0.0;
        (void)defender;
    }

    // (d) detector auc ordering between the stealth and no-stealth attacks
    {
        const auto rows = run_stage(cfg, "detect");
        write_csv(cfg.out_dir + "/detect.csv", rows);
        double auc_stealth = -1.0, auc_nonstealth = -1.0;
        for (const auto& row : rows) {
            if (row.codec == "pgm_stealth" && row.metric == "auc") auc_stealth = row.value;
            if (row.codec == "pgm_nonstealth" && row.metric == "auc") auc_nonstealth = row.value;
        }
        std::printf("  detector auc: stealth %.3f vs non-stealth %.3f\n", auc_stealth, auc_nonstealth);
        ok = ok && auc_stealth >= 0.0 && auc_nonstealth >= 0.0 && auc_stealth < auc_nonstealth;
    }
    return ok;
}

// ---- criterion 9 ----

bool determinism_criterion(const ExperimentConfig& base) {
    ExperimentConfig cfg = base;
    cfg.sweep_trials = 10;
    cfg.psr_list = {-16.0, -10.0};
    cfg.downstream_trials = 6;
    const auto rows1 = run_stage(cfg, "attack-sweep");
    const auto rows2 = run_stage(cfg, "attack-sweep");
    const std::string p1 = cfg.out_dir + "/determinism_a.csv";
    const std::string p2 = cfg.out_dir + "/determinism_b.csv";
    write_csv(p1, rows1);
    write_csv(p2, rows2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    return !b1.empty() && b1 == b2;
}

} // namespace

int main() {
    ExperimentConfig cfg = default_config();
    cfg.seed = 0;
    cfg.out_dir = "acceptance_run";
    cfg.train_nonstealth_pgm = true;

    std::printf("== acceptance suite (seed %llu) ==\n",
                static_cast<unsigned long long>(cfg.seed));

    double t0 = now_s();
    report(1, "phy exactness", physical_layer_exactness(), now_s() - t0);

    t0 = now_s();
    report(2, "autodiff", autodiff_soundness(), now_s() - t0);

    t0 = now_s();
    report(4, "transform algebra", transform_algebra(), now_s() - t0);

    ensure_artifacts(cfg);

    t0 = now_s();
    report(3, "power budget", power_and_stealth_budget(cfg), now_s() - t0);

    t0 = now_s();
    const auto ordering = attack_ordering(cfg);
    const double ordering_time = now_s() - t0;
    report(5, "attack ordering", ordering.ordering_ok, ordering_time);
    report(6, "transferability", ordering.transfer_ok, 0.0);

    t0 = now_s();
    report(7, "downstream", downstream_criterion(cfg), now_s() - t0);

    t0 = now_s();
    report(8, "defenses", defense_criterion(cfg), now_s() - t0);

    t0 = now_s();
    report(9, "determinism", determinism_criterion(cfg), now_s() - t0);

    std::printf("== %s ==\n", g_all_ok ? "ALL CRITERIA PASSED" : "FAILURES PRESENT");
    return g_all_ok ? 0 : 1;
}
