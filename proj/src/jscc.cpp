// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/jscc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsim::jscc {

using nn::Tape;
using nn::Tensor;
using nn::Var;
using phy::cd;
using phy::SymbolGrid;

const char* modality_name(Modality q) {
    switch (q) {
        case Modality::Image: return "image";
        case Modality::Video: return "video";
        case Modality::Speech: return "speech";
        case Modality::Text: return "text";
    }
    return "?";
}

Modality modality_from_name(const std::string& name) {
    if (name == "image") return Modality::Image;
    if (name == "video") return Modality::Video;
    if (name == "speech") return Modality::Speech;
    if (name == "text") return Modality::Text;
    throw std::invalid_argument("unknown modality: " + name);
}

const char* variant_name(ArchVariant v) {
    switch (v) {
        case ArchVariant::Target: return "target";
        case ArchVariant::Narrow: return "narrow";
        case ArchVariant::Wide: return "wide";
    }
    return "?";
}

// ---- framing ----

Tensor speech_frame(const Tensor& samples, const FramingConfig& cfg) {
    if (samples.size() != cfg.frame_count * cfg.frame_len)
        throw std::invalid_argument("speech_frame: sample count does not match framing config");
    return Tensor({cfg.frame_count, cfg.frame_len}, samples.vec());
}

Tensor speech_deframe(const Tensor& framed, const FramingConfig& cfg) {
    if (framed.size() != cfg.frame_count * cfg.frame_len)
        throw std::invalid_argument("speech_deframe: element count does not match framing config");
    return Tensor({cfg.frame_count * cfg.frame_len}, framed.vec());
}

// ---- text ----

Tensor text_onehot(const std::vector<int>& sentence, const TextVocab& vocab) {
    if (sentence.size() > vocab.max_len)
        throw std::invalid_argument("text_onehot: sentence longer than max_len");
    Tensor out({vocab.max_len, static_cast<std::size_t>(vocab.size)});
    for (std::size_t p = 0; p < vocab.max_len; ++p) {
        int tok;
        if (p < sentence.size())
            tok = sentence[p];
        else if (p == sentence.size())
            tok = vocab.end;
        else
            tok = vocab.pad;
        if (tok < 0 || tok >= vocab.size) throw std::invalid_argument("text_onehot: token out of range");
        out[p * vocab.size + tok] = 1.0;
    }
    return out;
}

std::vector<int> text_greedy_decode(const Tensor& logits, const TextVocab& vocab) {
    if (logits.rank() != 2 || logits.dim(1) != static_cast<std::size_t>(vocab.size))
        throw std::invalid_argument("text_greedy_decode: logits must be [len, vocab]");
    if (!logits.all_finite()) throw std::invalid_argument("text_greedy_decode: non-finite logits");
    std::vector<int> out;
    for (std::size_t p = 0; p < logits.dim(0); ++p) {
        const double* row = logits.data() + p * vocab.size;
        int best = 0;
        for (int v = 1; v < vocab.size; ++v)
            if (row[v] > row[best]) best = v; // strict: ties keep the lowest id
        if (best == vocab.end) break;
        out.push_back(best);
    }
    return out;
}

// ---- GOP ----

GopStructure sequential_gop(std::size_t p) {
    GopStructure s;
    s.order.resize(p);
    std::iota(s.order.begin(), s.order.end(), 1);
    return s;
}

GopStructure hierarchical_gop4() { return GopStructure{{1, 3, 2, 4}}; }

static void check_structure(const GopStructure& s) {
    std::vector<bool> seen(s.order.size(), false);
    for (int v : s.order) {
        if (v < 1 || v > static_cast<int>(s.order.size()) || seen[v - 1])
            throw std::invalid_argument("gop structure is not a bijection");
        seen[v - 1] = true;
    }
}

int gop_order(const GopStructure& s, int t) {
    check_structure(s);
    if (t < 1 || t > static_cast<int>(s.order.size()))
        throw std::invalid_argument("gop_order: frame index out of range");
    return s.order[t - 1];
}

int gop_order_inverse(const GopStructure& s, int pos) {
    check_structure(s);
    for (std::size_t t = 0; t < s.order.size(); ++t)
        if (s.order[t] == pos) return static_cast<int>(t + 1);
    throw std::invalid_argument("gop_order_inverse: position out of range");
}

void GopBuffer::push(Tensor frame) {
    if (frames_.size() >= capacity_) throw std::runtime_error("gop buffer overflow");
    frames_.push_back(std::move(frame));
}

const Tensor& GopBuffer::last() const {
    if (frames_.empty()) throw std::runtime_error("gop buffer is empty");
    return frames_.back();
}

// ---- budgets ----

std::size_t source_dim(Modality q) {
    switch (q) {
        case Modality::Image:
        case Modality::Video: return 3 * harness::kImageSide * harness::kImageSide;
        case Modality::Speech: return harness::kSpeechSamples;
        case Modality::Text: return 12 * 16; // max_len * embed_dim
    }
    return 0;
}

std::size_t n_symbols(Modality q, int rate_denom) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(source_dim(q)) / static_cast<double>(rate_denom)));
}

std::size_t n_payload_rows(Modality q, int rate_denom) {
    return (n_symbols(q, rate_denom) + 47) / 48;
}

std::string CodecSpec::tag() const {
    return std::string(modality_name(q)) + "_" + phy::constellation_name(c) + "_r" +
           std::to_string(rate_denom) + "_" + variant_name(arch);
}

SymbolGrid symbols_to_payload(const std::vector<cd>& symbols) {
    const std::size_t rows = (symbols.size() + 47) / 48;
    SymbolGrid g(rows, 48);
    for (std::size_t i = 0; i < symbols.size(); ++i) g[i] = symbols[i];
    return g;
}

std::vector<cd> payload_to_symbols(const SymbolGrid& payload, std::size_t count) {
    if (payload.size() < count) throw std::invalid_argument("payload_to_symbols: grid too small");
    return std::vector<cd>(payload.vec().begin(), payload.vec().begin() + static_cast<long>(count));
}

// ---- codec construction ----

JsccCodec::JsccCodec(const CodecSpec& spec, std::uint64_t init_seed) : spec_(spec) {
    RngStream init(init_seed);
    switch (spec_.arch) {
        case ArchVariant::Target:
            h1_ = 12; h2_ = 24; h3_ = 24; extra_enc_conv_ = false;
            ffn_hidden_ = 32; attn_blocks_ = 1;
            break;
        case ArchVariant::Narrow:
            h1_ = 9; h2_ = 18; h3_ = 0; extra_enc_conv_ = false;
            ffn_hidden_ = 0; attn_blocks_ = 1;
            break;
        case ArchVariant::Wide:
            h1_ = 15; h2_ = 30; h3_ = 30; extra_enc_conv_ = true;
            ffn_hidden_ = 40; attn_blocks_ = 2;
            break;
    }
    switch (spec_.q) {
        case Modality::Image: build_image_model(init); break;
        case Modality::Video: build_video_model(init); break;
        case Modality::Speech: build_speech_model(init); break;
        case Modality::Text: build_text_model(init); break;
    }

    std::string desc = std::string(modality_name(spec_.q)) + ":" + variant_name(spec_.arch) + ":";
    for (const auto& l : enc_convs_) desc += std::to_string(l.w->value.dim(0)) + "-";
    desc += "|" + std::to_string(params_.scalar_count());
    arch_descriptor_ = desc;
}

static std::vector<nn::Conv2dLayer> conv_stack(nn::ParamStore& store, const std::string& prefix,
                                               const std::vector<std::pair<std::size_t, std::size_t>>& io,
                                               const std::vector<int>& strides, RngStream& init) {
    std::vector<nn::Conv2dLayer> out;
    for (std::size_t i = 0; i < io.size(); ++i)
        out.push_back(nn::Conv2dLayer::make(store, prefix + std::to_string(i), io[i].first,
                                            io[i].second, 3, strides[i], nn::PadMode::Same, init));
    return out;
}

void JsccCodec::build_image_model(RngStream& init) {
    out_channels_ = 2 * symbol_count() / 64;
    std::vector<std::pair<std::size_t, std::size_t>> enc_io;
    std::vector<int> enc_s;
    enc_io.push_back({3, h1_}); enc_s.push_back(2);
    enc_io.push_back({h1_, h2_}); enc_s.push_back(2);
    if (spec_.arch != ArchVariant::Narrow) { enc_io.push_back({h2_, h3_}); enc_s.push_back(1); }
    if (extra_enc_conv_) { enc_io.push_back({h3_, h3_}); enc_s.push_back(1); }
    enc_io.push_back({spec_.arch == ArchVariant::Narrow ? h2_ : h3_, out_channels_}); enc_s.push_back(1);
    enc_convs_ = conv_stack(params_, "enc.c", enc_io, enc_s, init);

    std::vector<std::pair<std::size_t, std::size_t>> dec_io;
    std::vector<int> dec_s;
    if (spec_.arch == ArchVariant::Narrow) {
        dec_io = {{out_channels_, h2_}, {h2_, h1_}};
        dec_s = {1, 1};
    } else if (extra_enc_conv_) {
        dec_io = {{out_channels_, h3_}, {h3_, h3_}, {h3_, h2_}, {h2_, h1_}};
        dec_s = {1, 1, 1, 1};
    } else {
        dec_io = {{out_channels_, h3_}, {h3_, h2_}, {h2_, h1_}};
        dec_s = {1, 1, 1};
    }
    dec_convs_ = conv_stack(params_, "dec.c", dec_io, dec_s, init);
    dec_out_ = nn::Conv2dLayer::make(params_, "dec.out", h1_, 3, 3, 1, nn::PadMode::Same, init);
}

void JsccCodec::build_video_model(RngStream& init) {
    build_image_model(init); // intra frame path
    std::vector<std::pair<std::size_t, std::size_t>> enc_io;
    std::vector<int> enc_s;
    enc_io.push_back({6, h1_}); enc_s.push_back(2);
    enc_io.push_back({h1_, h2_}); enc_s.push_back(2);
    if (spec_.arch != ArchVariant::Narrow) { enc_io.push_back({h2_, h3_}); enc_s.push_back(1); }
    if (extra_enc_conv_) { enc_io.push_back({h3_, h3_}); enc_s.push_back(1); }
    enc_io.push_back({spec_.arch == ArchVariant::Narrow ? h2_ : h3_, out_channels_}); enc_s.push_back(1);
    penc_convs_ = conv_stack(params_, "p.enc.c", enc_io, enc_s, init);

    std::vector<std::pair<std::size_t, std::size_t>> dec_io;
    std::vector<int> dec_s;
    if (spec_.arch == ArchVariant::Narrow) {
        dec_io = {{out_channels_, h2_}, {h2_, h1_}};
        dec_s = {1, 1};
    } else if (extra_enc_conv_) {
        dec_io = {{out_channels_, h3_}, {h3_, h3_}, {h3_, h2_}, {h2_, h1_}};
        dec_s = {1, 1, 1, 1};
    } else {
        dec_io = {{out_channels_, h3_}, {h3_, h2_}, {h2_, h1_}};
        dec_s = {1, 1, 1};
    }
    pdec_convs_ = conv_stack(params_, "p.dec.c", dec_io, dec_s, init);
    pdec_out_ = nn::Conv2dLayer::make(params_, "p.dec.out", h1_ + 3, 3, 3, 1, nn::PadMode::Same, init);
}

void JsccCodec::build_speech_model(RngStream& init) {
    const std::size_t n2 = 2 * symbol_count();
    const std::size_t row_out = (n2 + framing_.frame_count - 1) / framing_.frame_count;
    const std::size_t sw = spec_.arch == ArchVariant::Narrow ? 6 : spec_.arch == ArchVariant::Wide ? 10 : 8;
    // width-only downsampling keeps one feature row per speech frame
    std::vector<nn::Conv2dLayer> convs;
    convs.push_back(nn::Conv2dLayer::make(params_, "enc.c0", 1, sw, 3, 1, nn::PadMode::Same, init));
    convs.back().stride = 1;
    enc_convs_ = std::move(convs);
    enc_convs_[0].pad = nn::PadMode::Same;
    // manual strides: (1,2) twice to reach [8,16,16]
    enc_convs_.push_back(nn::Conv2dLayer::make(params_, "enc.c1", sw, 8, 3, 1, nn::PadMode::Same, init));
    if (spec_.arch != ArchVariant::Narrow)
        enc_convs_.push_back(nn::Conv2dLayer::make(params_, "enc.c2", 8, 8, 3, 1, nn::PadMode::Same, init));
    if (extra_enc_conv_)
        enc_convs_.push_back(nn::Conv2dLayer::make(params_, "enc.c3", 8, 8, 3, 1, nn::PadMode::Same, init));
    attn_enc_.push_back(nn::AttentionLayer::make(params_, "enc.attn", 8 * 16, init));
    row_head_ = nn::LinearLayer::make(params_, "enc.row_head", 8 * 16, row_out, init);
    raw_head_ = nn::LinearLayer::make(params_, "enc.raw_head", framing_.frame_len, row_out, init);

    dec_row_a_ = nn::LinearLayer::make(params_, "dec.row_a", row_out, 128, init);
    dec_row_b_ = nn::LinearLayer::make(params_, "dec.row_b", 128, framing_.frame_len, init);
    dec_convs_.push_back(
        nn::Conv2dLayer::make(params_, "dec.refine", 1, sw, 3, 1, nn::PadMode::Same, init));
    dec_out_ = nn::Conv2dLayer::make(params_, "dec.out", sw, 1, 3, 1, nn::PadMode::Same, init);
}

void JsccCodec::build_text_model(RngStream& init) {
    const std::size_t n2 = 2 * symbol_count();
    const std::size_t d = vocab_.embed_dim;
    embed_ = &params_.create_glorot("embed", {static_cast<std::size_t>(vocab_.size), d},
                                    vocab_.size, d, init);
    for (int b = 0; b < attn_blocks_; ++b) {
        attn_enc_.push_back(nn::AttentionLayer::make(params_, "enc.attn" + std::to_string(b), d, init));
        attn_dec_.push_back(nn::AttentionLayer::make(params_, "dec.attn" + std::to_string(b), d, init));
    }
    if (ffn_hidden_ > 0) {
        ffn_enc_in_ = nn::LinearLayer::make(params_, "enc.ffn_in", d, ffn_hidden_, init);
        ffn_enc_out_ = nn::LinearLayer::make(params_, "enc.ffn_out", ffn_hidden_, d, init);
        ffn_dec_in_ = nn::LinearLayer::make(params_, "dec.ffn_in", d, ffn_hidden_, init);
        ffn_dec_out_ = nn::LinearLayer::make(params_, "dec.ffn_out", ffn_hidden_, d, init);
    }
    // blockwise coding: groups of 3 tokens share one linear coder, which is
    // far easier to fit than a single global map; a direct one-hot skip on
    // both sides gives the optimizer a digital-style path from the start
    enc_fc_ = nn::LinearLayer::make(params_, "enc.fc", 3 * d, n2 / 4, init);
    dec_fc_ = nn::LinearLayer::make(params_, "dec.fc", n2 / 4, 3 * d, init);
    raw_head_ = nn::LinearLayer::make(params_, "enc.raw_head",
                                      3 * static_cast<std::size_t>(vocab_.size), n2 / 4, init);
    dec_row_a_ = nn::LinearLayer::make(params_, "dec.raw_head", n2 / 4,
                                       3 * static_cast<std::size_t>(vocab_.size), init);
    tok_out_ = nn::LinearLayer::make(params_, "dec.tok", d, vocab_.size, init);

    posenc_ = Tensor({vocab_.max_len, d});
    for (std::size_t p = 0; p < vocab_.max_len; ++p)
        for (std::size_t i = 0; i < d; ++i) {
            const double angle = static_cast<double>(p) /
                                 std::pow(10000.0, 2.0 * static_cast<double>(i / 2) / static_cast<double>(d));
            posenc_[p * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
}

// ---- graph builders ----

nn::Var JsccCodec::symbols_to_payload_var(Tape& t, Var flat) const {
    const std::size_t n = symbol_count();
    const std::size_t rows = payload_rows();
    Var pairs = reshape(flat, {n, 2});
    if (rows * 48 > n) {
        Var pad = t.constant(Tensor({rows * 48 - n, 2}));
        pairs = concat0(pairs, pad);
    }
    return reshape(pairs, {rows, 48, 2});
}

static Var run_convs(Tape& t, Var x, const std::vector<nn::Conv2dLayer>& convs, bool relu_last) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
        x = convs[i](t, x);
        if (relu_last || i + 1 < convs.size()) x = relu(x);
    }
    return x;
}

nn::Var JsccCodec::encode_image(Tape& t, Var x, bool pframe, const Var* prev) const {
    if (x.shape() != std::vector<std::size_t>{3, 32, 32})
        throw std::invalid_argument("encode: image frame must be [3,32,32]");
    Var in = x;
    const auto& convs = pframe ? penc_convs_ : enc_convs_;
    if (pframe) {
        if (prev == nullptr) throw std::invalid_argument("encode: p-frame requires a reference frame");
        in = concat0(x, *prev);
    }
    Var feat = run_convs(t, in, convs, false);
    return reshape(feat, {out_channels_ * 64});
}

nn::Var JsccCodec::decode_image(Tape& t, Var sym, bool pframe, const Var* prev) const {
    Var x = reshape(sym, {out_channels_, 8, 8});
    const auto& convs = pframe ? pdec_convs_ : dec_convs_;
    // conv stack with upsampling to reach 32x32: upsample after the first
    // conv and after the second-to-last conv
    std::size_t ups_done = 0;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        x = relu(convs[i](t, x));
        if (ups_done < 2 && (i == 0 || i + 1 == convs.size())) {
            x = upsample2x(x);
            ++ups_done;
        }
    }
    while (ups_done < 2) {
        x = upsample2x(x);
        ++ups_done;
    }
    if (pframe) {
        if (prev == nullptr) throw std::invalid_argument("decode: p-frame requires a reference frame");
        x = concat0(x, *prev);
        return sigmoid(pdec_out_(t, x));
    }
    return sigmoid(dec_out_(t, x));
}

nn::Var JsccCodec::encode_speech(Tape& t, Var x) const {
    if (x.shape() != std::vector<std::size_t>{1, 16, 64})
        throw std::invalid_argument("encode: speech input must be framed [1,16,64]");
    const std::size_t n2 = 2 * symbol_count();
    const std::size_t row_out = (n2 + 15) / 16;
    // conv trunk downsamples within rows only, then one attention layer
    // mixes across frames
    Var h = relu(conv2d(x, t.param(*enc_convs_[0].w), t.param(*enc_convs_[0].b), 1, 2,
                        nn::PadMode::Same)); // [sw,16,32]
    h = relu(conv2d(h, t.param(*enc_convs_[1].w), t.param(*enc_convs_[1].b), 1, 2,
                    nn::PadMode::Same)); // [8,16,16]
    for (std::size_t i = 2; i < enc_convs_.size(); ++i) h = relu(enc_convs_[i](t, h));
    Var seq = reshape(swap01(h), {16, 8 * 16});
    seq = attn_enc_[0](t, seq);
    // per-row head plus a raw-sample skip
    Var head = add(row_head_(t, seq), raw_head_(t, reshape(x, {16, 64})));
    Var flat = reshape(head, {16 * row_out});
    if (16 * row_out > n2) flat = slice_rows(flat, 0, static_cast<int>(n2));
    return flat;
}

nn::Var JsccCodec::decode_speech(Tape& t, Var sym) const {
    const std::size_t n2 = 2 * symbol_count();
    const std::size_t row_out = (n2 + 15) / 16;
    Var padded = sym;
    if (16 * row_out > n2)
        padded = concat0(sym, t.constant(Tensor({16 * row_out - n2})));
    Var rows = dec_row_b_(t, relu(dec_row_a_(t, reshape(padded, {16, row_out}))));
    Var base = reshape(rows, {1, 16, 64});
    Var refined = dec_out_(t, relu(dec_convs_[0](t, base)));
    return tanh_(add(base, refined));
}

nn::Var JsccCodec::encode_text(Tape& t, Var x) const {
    if (x.shape() != std::vector<std::size_t>{vocab_.max_len, static_cast<std::size_t>(vocab_.size)})
        throw std::invalid_argument("encode: text input must be one-hot [max_len, vocab]");
    Var seq = add(matmul(x, t.param(*embed_)), t.constant(posenc_));
    for (const auto& a : attn_enc_) seq = a(t, seq);
    if (ffn_hidden_ > 0) seq = add(seq, ffn_enc_out_(t, relu(ffn_enc_in_(t, seq))));
    Var blocks = reshape(seq, {4, 3 * vocab_.embed_dim});
    Var raw_blocks = reshape(x, {4, 3 * static_cast<std::size_t>(vocab_.size)});
    Var head = add(enc_fc_(t, blocks), raw_head_(t, raw_blocks));
    return reshape(head, {2 * symbol_count()});
}

nn::Var JsccCodec::decode_text(Tape& t, Var sym) const {
    Var blocks = reshape(sym, {4, 2 * symbol_count() / 4});
    Var seq = reshape(dec_fc_(t, blocks), {vocab_.max_len, vocab_.embed_dim});
    for (const auto& a : attn_dec_) seq = a(t, seq);
    if (ffn_hidden_ > 0) seq = add(seq, ffn_dec_out_(t, relu(ffn_dec_in_(t, seq))));
    Var raw_logits = reshape(dec_row_a_(t, blocks),
                             {vocab_.max_len, static_cast<std::size_t>(vocab_.size)});
    return add(tok_out_(t, seq), raw_logits); // logits [max_len, vocab]
}

nn::Var JsccCodec::build_encode(Tape& t, Var x, const Var* prev) const {
    switch (spec_.q) {
        case Modality::Image: return encode_image(t, x, false, nullptr);
        case Modality::Video:
            return prev ? encode_image(t, x, true, prev) : encode_image(t, x, false, nullptr);
        case Modality::Speech: return encode_speech(t, x);
        case Modality::Text: return encode_text(t, x);
    }
    throw std::logic_error("unreachable");
}

nn::Var JsccCodec::build_decode(Tape& t, Var payload, const Var* prev) const {
    const std::size_t rows = payload_rows();
    if (payload.shape() != std::vector<std::size_t>{rows, 48, 2})
        throw std::invalid_argument("decode: payload row count mismatch for " + spec_.tag());
    Var mapped = soft_mapping_ ? payload : map_constellation_ste(payload, static_cast<int>(spec_.c));
    Var pairs = reshape(mapped, {rows * 48, 2});
    Var flat = reshape(slice_rows(pairs, 0, static_cast<int>(symbol_count())), {2 * symbol_count()});
    switch (spec_.q) {
        case Modality::Image: return decode_image(t, flat, false, nullptr);
        case Modality::Video:
            return prev ? decode_image(t, flat, true, prev) : decode_image(t, flat, false, nullptr);
        case Modality::Speech: return decode_speech(t, flat);
        case Modality::Text: return decode_text(t, flat);
    }
    throw std::logic_error("unreachable");
}

// ---- plain wrappers ----

phy::SymbolGrid JsccCodec::encode(const Tensor& x, GopBuffer& buffer) const {
    if (spec_.q != Modality::Video && !buffer.empty())
        throw std::invalid_argument("encode: buffer must be empty unless the codec is video");
    if (spec_.q == Modality::Video && buffer.size() >= harness::kGopSize)
        throw std::runtime_error("encode: gop buffer overflow");
    Tape t;
    Var xv = t.constant(x);
    std::optional<Var> prev;
    if (spec_.q == Modality::Video && !buffer.empty()) prev = t.constant(buffer.last());
    Var flat = build_encode(t, xv, prev ? &*prev : nullptr);
    Var payload = symbols_to_payload_var(t, flat);

    SymbolGrid grid = SymbolGrid::from_tensor(payload.value());
    if (spec_.q == Modality::Video) {
        // local reconstruction through the mapper, no channel
        Var recon = build_decode(t, payload, prev ? &*prev : nullptr);
        buffer.push(recon.value());
    }
    return grid;
}

Tensor JsccCodec::decode(const SymbolGrid& equalized_payload, GopBuffer& buffer) const {
    if (equalized_payload.rows() != payload_rows() || equalized_payload.cols() != 48)
        throw std::invalid_argument("decode: payload grid shape mismatch for " + spec_.tag());
    Tape t;
    Var payload = t.constant(equalized_payload.to_tensor());
    std::optional<Var> prev;
    if (spec_.q == Modality::Video && !buffer.empty()) prev = t.constant(buffer.last());
    Var recon = build_decode(t, payload, prev ? &*prev : nullptr);
    Tensor out = recon.value();
    if (spec_.q == Modality::Video) buffer.push(out);
    return out;
}

// ---- datasets ----

std::size_t ModalityDataset::size() const {
    switch (kind) {
        case Modality::Image:
        case Modality::Speech: return items.size();
        case Modality::Video: return clips.size();
        case Modality::Text: return sentences.size();
    }
    return 0;
}

ModalityDataset image_dataset(std::vector<Tensor> images) {
    ModalityDataset d;
    d.kind = Modality::Image;
    d.items = std::move(images);
    return d;
}

ModalityDataset video_dataset(std::vector<harness::VideoClip> clips) {
    ModalityDataset d;
    d.kind = Modality::Video;
    d.clips = std::move(clips);
    return d;
}

ModalityDataset speech_dataset(std::vector<Tensor> waves) {
    ModalityDataset d;
    d.kind = Modality::Speech;
    d.items = std::move(waves);
    return d;
}

ModalityDataset text_dataset(std::vector<std::vector<int>> sentences) {
    ModalityDataset d;
    d.kind = Modality::Text;
    d.sentences = std::move(sentences);
    return d;
}

// ---- channel plumbing ----

ChannelDraw make_channel_draw(const phy::ChannelRealization& ch, const phy::OfdmConfig& ofdm,
                              std::size_t payload_rows, RngStream& noise_rng) {
    ChannelDraw draw;
    draw.ch = ch;
    const SymbolGrid rx_pre = apply_channel(ofdm.preamble, draw.ch, noise_rng);
    draw.h_est = ls_estimate(rx_pre, ofdm);
    for (std::size_t k : ofdm.data_subcarriers)
        if (std::abs(draw.h_est[k]) <= 1e-8) draw.deep_fades.push_back(k);
    draw.noise_payload = phy::draw_noise(payload_rows, ofdm.n_fft, draw.ch.noise_variance, noise_rng);
    return draw;
}

ChannelDraw make_channel_draw(const phy::ChannelModel& model, const phy::OfdmConfig& ofdm,
                              std::size_t payload_rows, RngStream& channel_rng, RngStream& noise_rng) {
    return make_channel_draw(sample_channel(channel_rng, model, ofdm.n_fft), ofdm, payload_rows,
                             noise_rng);
}

nn::Var receive_payload_var(Tape& t, Var mapped_payload, const ChannelDraw& draw,
                            const phy::OfdmConfig& ofdm, const std::vector<std::size_t>& perm) {
    const std::size_t rows = mapped_payload.shape()[0];
    if (perm.size() != 48) throw std::invalid_argument("receive_payload_var: perm must cover 48 slots");
    Tensor ratio({rows, 48, 2});
    Tensor offset({rows, 48, 2});
    for (std::size_t j = 0; j < 48; ++j) {
        const std::size_t k = ofdm.data_subcarriers[perm[j]];
        const bool faded = std::abs(draw.h_est[k]) <= 1e-8;
        const cd r = faded ? cd{0.0, 0.0} : draw.ch.freq_response[k] / draw.h_est[k];
        for (std::size_t i = 0; i < rows; ++i) {
            ratio[(i * 48 + j) * 2] = r.real();
            ratio[(i * 48 + j) * 2 + 1] = r.imag();
            const cd w = faded ? cd{0.0, 0.0} : draw.noise_payload.at(i, k) / draw.h_est[k];
            offset[(i * 48 + j) * 2] = w.real();
            offset[(i * 48 + j) * 2 + 1] = w.imag();
        }
    }
    return add(cmul(mapped_payload, t.constant(ratio)), t.constant(offset));
}

// ---- training ----

namespace {

std::vector<std::size_t> identity_perm(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
}

// random payload-slot to data-subcarrier interleave; the receiver knows it,
// so training and inference only see the decorrelation of deep fades
std::vector<std::size_t> draw_slot_interleave(RngStream& rng) {
    auto p = identity_perm(48);
    for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.uniform_int(i)]);
    return p;
}

// one transmission through the shortcut channel, returning the equalized
// compact payload var (pre re-quantization) and the quantization-gap term
struct SendResult {
    Var eq;
    Var commit; // mean squared gap between encoder output and its grid point
};

SendResult send_through(Tape& t, const JsccCodec& codec, Var x, const Var* prev,
                        const ChannelDraw& draw, const phy::OfdmConfig& ofdm,
                        const std::vector<std::size_t>& perm) {
    Var flat = codec.build_encode(t, x, prev);
    Var payload = codec.symbols_to_payload_var(t, flat);
    SendResult out;
    if (codec.soft_mapping()) {
        // relaxed mapper: transmit the continuous code but keep pulling it
        // toward the grid so the later snap is cheap
        phy::SymbolGrid snapped = map_constellation(
            phy::SymbolGrid::from_tensor(payload.value()), codec.spec().c);
        out.commit = mse(payload, t.constant(snapped.to_tensor()));
        out.eq = receive_payload_var(t, payload, draw, ofdm, perm);
        return out;
    }
    Var mapped = map_constellation_ste(payload, static_cast<int>(codec.spec().c));
    out.commit = mse(payload, t.constant(mapped.value()));
    out.eq = receive_payload_var(t, mapped, draw, ofdm, perm);
    return out;
}

struct ItemRefs {
    const Tensor* image = nullptr;
    const harness::VideoClip* clip = nullptr;
    const Tensor* wave = nullptr;
    const std::vector<int>* sentence = nullptr;
};

ItemRefs dataset_item(const ModalityDataset& data, std::size_t i) {
    ItemRefs r;
    switch (data.kind) {
        case Modality::Image: r.image = &data.items[i]; break;
        case Modality::Video: r.clip = &data.clips[i]; break;
        case Modality::Speech: r.wave = &data.items[i]; break;
        case Modality::Text: r.sentence = &data.sentences[i]; break;
    }
    return r;
}

// loss graph for one dataset item; draws one channel per transmission
Var item_loss(Tape& t, const JsccCodec& codec, const ItemRefs& item, const TrainConfig& cfg,
              RngStream& channel_rng, RngStream& noise_rng) {
    const phy::OfdmConfig& ofdm = cfg.ofdm;
    switch (codec.spec().q) {
        case Modality::Image: {
            Var x = t.constant(*item.image);
            const ChannelDraw draw =
                make_channel_draw(cfg.channel, ofdm, codec.payload_rows(), channel_rng, noise_rng);
            auto sent = send_through(t, codec, x, nullptr, draw, ofdm, draw_slot_interleave(noise_rng));
            Var recon = codec.build_decode(t, sent.eq, nullptr);
            return add(mse(recon, x), scale(sent.commit, cfg.commit_weight));
        }
        case Modality::Speech: {
            const Tensor framed = speech_frame(*item.wave, codec.framing());
            Var x = t.constant(Tensor({1, 16, 64}, framed.vec()));
            const ChannelDraw draw =
                make_channel_draw(cfg.channel, ofdm, codec.payload_rows(), channel_rng, noise_rng);
            auto sent = send_through(t, codec, x, nullptr, draw, ofdm, draw_slot_interleave(noise_rng));
            Var recon = codec.build_decode(t, sent.eq, nullptr);
            return add(mse(recon, x), scale(sent.commit, cfg.commit_weight));
        }
        case Modality::Text: {
            const Tensor onehot = text_onehot(*item.sentence, codec.vocab());
            Var x = t.constant(onehot);
            const ChannelDraw draw =
                make_channel_draw(cfg.channel, ofdm, codec.payload_rows(), channel_rng, noise_rng);
            auto sent = send_through(t, codec, x, nullptr, draw, ofdm, draw_slot_interleave(noise_rng));
            Var logits = codec.build_decode(t, sent.eq, nullptr);
            return add(softmax_xent(logits, t.constant(onehot)), scale(sent.commit, cfg.commit_weight));
        }
        case Modality::Video: {
            // per-frame transmissions; the encoder conditions on the locally
            // decoded chain, the receiver on its own decoded chain
            std::optional<Var> tx_prev, rx_prev;
            Var total{nullptr, -1};
            for (std::size_t f = 0; f < item.clip->frames.size(); ++f) {
                Var x = t.constant(item.clip->frames[f]);
                const Var* prev_enc = f == 0 ? nullptr : &*tx_prev;
                Var flat = codec.build_encode(t, x, prev_enc);
                Var payload = codec.symbols_to_payload_var(t, flat);
                Var mapped = codec.soft_mapping()
                                 ? payload
                                 : map_constellation_ste(payload, static_cast<int>(codec.spec().c));
                // transmitter-side reconstruction (no channel)
                Var local = codec.build_decode(t, payload, prev_enc);
                const ChannelDraw draw =
                    make_channel_draw(cfg.channel, ofdm, codec.payload_rows(), channel_rng, noise_rng);
                Var eq = receive_payload_var(t, mapped, draw, ofdm, draw_slot_interleave(noise_rng));
                Var recon = codec.build_decode(t, eq, f == 0 ? nullptr : &*rx_prev);
                Var frame_loss = mse(recon, x);
                if (cfg.commit_weight > 0.0 && !codec.soft_mapping())
                    frame_loss = add(frame_loss, scale(mse(payload, t.constant(mapped.value())),
                                                       cfg.commit_weight));
                total = f == 0 ? frame_loss : add(total, frame_loss);
                tx_prev = local;
                rx_prev = recon;
            }
            return total;
        }
    }
    throw std::logic_error("unreachable");
}

} // namespace

std::size_t warm_start_from(JsccCodec& dst, const JsccCodec& src) {
    std::size_t copied = 0;
    const auto tensors = src.params().to_tensors();
    for (nn::Parameter* p : dst.params().all()) {
        auto it = tensors.find(p->name);
        if (it != tensors.end() && it->second.same_shape(p->value)) {
            p->value = it->second;
            ++copied;
        }
    }
    return copied;
}

double validation_loss(const JsccCodec& codec, const ModalityDataset& data, const TrainConfig& cfg,
                       std::uint64_t salt) {
    TrainConfig vcfg = cfg;
    vcfg.commit_weight = 0.0; // reconstruction only
    RngStream root(cfg.seed);
    RngStream val = root.derive("val").derive(salt);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        RngStream chan = val.derive("chan").derive(i);
        RngStream noise = val.derive("noise").derive(i);
        Tape t;
        Var loss = item_loss(t, codec, dataset_item(data, i), vcfg, chan, noise);
        acc += loss.value()[0];
    }
    return acc / static_cast<double>(data.size());
}

TrainReport train_jscc(JsccCodec& codec, const ModalityDataset& train, const ModalityDataset& val,
                       const TrainConfig& cfg) {
    if (train.size() == 0) throw std::invalid_argument("train_jscc: empty dataset");
    TrainReport report;
    report.initial_val_loss = validation_loss(codec, val, cfg);

    RngStream root(cfg.seed);
    nn::AdamState adam;
    adam.lr = cfg.lr;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    std::map<std::string, Tensor> best_params = codec.params().to_tensors();
    double best_val = report.initial_val_loss;
    const int clean_epochs = cfg.epochs / 2;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // phase 1: end-to-end on a quiet channel (starting with the mapper
        // relaxed); phase 2: freeze the encoder and adapt the decoder to
        // the operating channel
        const bool noise_phase = epoch >= clean_epochs;
        const int soft_span = static_cast<int>(cfg.soft_fraction * cfg.epochs);
        codec.set_soft_mapping(epoch < soft_span);
        TrainConfig ecfg = cfg;
        if (codec.soft_mapping()) {
            const double through = soft_span > 0 ? static_cast<double>(epoch) / soft_span : 1.0;
            ecfg.commit_weight = cfg.commit_weight * (1.0 + 5.0 * through);
        }
        if (!noise_phase) ecfg.channel.snr_db = std::max(cfg.snr_start_db, cfg.channel.snr_db);
        adam.lr = cfg.lr;
        if (epoch * 5 >= clean_epochs * 4 && !noise_phase) adam.lr = cfg.lr / 3.0;
        if (noise_phase) adam.lr = cfg.lr / 2.0;
        if (epoch * 6 >= cfg.epochs * 5) adam.lr = cfg.lr / 6.0;
        for (nn::Parameter* p : codec.params().all())
            p->trainable = !noise_phase || !cfg.freeze_encoder_in_noise_phase ||
                           p->name.rfind("dec.", 0) == 0 || p->name.rfind("p.dec.", 0) == 0;
        RngStream erng = root.derive("epoch").derive(static_cast<std::uint64_t>(epoch));
        // deterministic shuffle
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[erng.uniform_int(i)]);
        std::size_t in_batch = 0;
        for (std::size_t bi = 0; bi < order.size(); ++bi) {
            RngStream chan = erng.derive("chan").derive(bi);
            RngStream noise = erng.derive("noise").derive(bi);
            Tape t;
            Var loss;
            try {
                loss = item_loss(t, codec, dataset_item(train, order[bi]), ecfg, chan, noise);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train_jscc diverged at epoch " + std::to_string(epoch) +
                                         " item " + std::to_string(bi) + ": " + e.what());
            }
            Var scaled = scale(loss, 1.0 / static_cast<double>(cfg.batch));
            t.backward(scaled);
            if (++in_batch == cfg.batch || bi + 1 == order.size()) {
                adam_step(codec.params(), adam);
                in_batch = 0;
            }
        }
        codec.set_soft_mapping(false);
        const double vloss = validation_loss(codec, val, cfg);
        report.epoch_val_losses.push_back(vloss);
        // the relaxed-mapper epochs are a warmup; their parameters are not
        // checkpoint candidates
        if (vloss < best_val && epoch * 4 >= cfg.epochs) {
            best_val = vloss;
            best_params = codec.params().to_tensors();
        }
    }
    // keep the best-validating parameters
    codec.params().load_tensors(best_params);
    for (nn::Parameter* p : codec.params().all()) p->trainable = true;
    report.final_val_loss = best_val;
    return report;
}

} // namespace wsim::jscc
