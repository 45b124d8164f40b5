// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_JSCC_HPP
#define WSIM_JSCC_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wsim/channel.hpp"
#include "wsim/dataset.hpp"
#include "wsim/grid.hpp"
#include "wsim/layers.hpp"
#include "wsim/optim.hpp"

namespace wsim::jscc {

enum class Modality : int { Image = 0, Video = 1, Speech = 2, Text = 3 };
enum class ArchVariant : int { Target = 0, Narrow = 1, Wide = 2 };

const char* modality_name(Modality q);
Modality modality_from_name(const std::string& name);
const char* variant_name(ArchVariant v);

// ---- speech framing ----
struct FramingConfig {
    std::size_t frame_count = 16;
    std::size_t frame_len = 64;
};

nn::Tensor speech_frame(const nn::Tensor& samples, const FramingConfig& cfg);   // [N] -> [rows,len]
nn::Tensor speech_deframe(const nn::Tensor& framed, const FramingConfig& cfg);  // exact inverse

// ---- text vocabulary ----
struct TextVocab {
    int size = 64;
    int pad = 0;
    int start = 1;
    int end = 2;
    std::size_t embed_dim = 16;
    std::size_t max_len = 12;
};

// content tokens, then the end marker, then pads out to max_len
nn::Tensor text_onehot(const std::vector<int>& sentence, const TextVocab& vocab);
// per-position argmax (lowest id wins ties), stopping at the end token
std::vector<int> text_greedy_decode(const nn::Tensor& logits, const TextVocab& vocab);

// ---- GOP structure ----
struct GopStructure {
    std::vector<int> order; // order[t-1] = coding position of display frame t
};

GopStructure sequential_gop(std::size_t p);
GopStructure hierarchical_gop4(); // (1,3,2,4)

int gop_order(const GopStructure& s, int t);          // m(t)
int gop_order_inverse(const GopStructure& s, int pos); // display frame coded at `pos`

class GopBuffer {
public:
    explicit GopBuffer(std::size_t gop_size = harness::kGopSize) : capacity_(gop_size) {}

    void push(nn::Tensor frame);
    void clear() { frames_.clear(); }
    bool empty() const { return frames_.empty(); }
    std::size_t size() const { return frames_.size(); }
    const nn::Tensor& last() const;
    const std::vector<nn::Tensor>& frames() const { return frames_; }

private:
    std::size_t capacity_;
    std::vector<nn::Tensor> frames_;
};

// ---- codec ----
struct CodecSpec {
    Modality q = Modality::Image;
    phy::Constellation c = phy::Constellation::Qam16;
    int rate_denom = 6; // coding rate lambda = 1/rate_denom
    ArchVariant arch = ArchVariant::Target;

    std::string tag() const;
};

std::size_t source_dim(Modality q);
std::size_t n_symbols(Modality q, int rate_denom); // round(lambda * source_dim)
std::size_t n_payload_rows(Modality q, int rate_denom); // ceil(n_symbols / 48)

// Symbol vector <-> compact payload grid (rows x 48), zero padded at the tail.
phy::SymbolGrid symbols_to_payload(const std::vector<phy::cd>& symbols);
std::vector<phy::cd> payload_to_symbols(const phy::SymbolGrid& payload, std::size_t n_symbols);

// Modality-specific toy encoder/decoder pair with per-(C, lambda, variant)
// weights. All model structure lives behind the two graph builders so that
// training, attack optimization, and plain inference share one code path.
class JsccCodec {
public:
    JsccCodec(const CodecSpec& spec, std::uint64_t init_seed);

    const CodecSpec& spec() const { return spec_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    std::string arch_descriptor() const { return arch_descriptor_; }
    const TextVocab& vocab() const { return vocab_; }
    const FramingConfig& framing() const { return framing_; }

    std::size_t symbol_count() const { return n_symbols(spec_.q, spec_.rate_denom); }
    std::size_t payload_rows() const { return n_payload_rows(spec_.q, spec_.rate_denom); }

    // graph builders; x shapes: image/video [3,32,32], speech [1,16,64]
    // (framed), text one-hot [max_len, vocab]. prev is the conditioning
    // frame for video P-frames (null for the intra frame).
    nn::Var build_encode(nn::Tape& t, nn::Var x, const nn::Var* prev) const;
    // mapped+equalized payload (compact [rows,48,2]) back to source space
    nn::Var build_decode(nn::Tape& t, nn::Var payload, const nn::Var* prev) const;

    nn::Var symbols_to_payload_var(nn::Tape& t, nn::Var flat_symbols) const;

    // Training-time relaxation: bypass the constellation mapper so the
    // continuous code can form before quantization snaps in. Always off
    // outside train_jscc.
    void set_soft_mapping(bool soft) { soft_mapping_ = soft; }
    bool soft_mapping() const { return soft_mapping_; }

    // Plain pipeline entry points. encode returns the pre-constellation
    // payload grid; for video it locally reconstructs the frame (through the
    // constellation mapper, no channel) and appends it to the buffer.
    phy::SymbolGrid encode(const nn::Tensor& x, GopBuffer& buffer) const;
    // applies the receiver-side re-quantization, decodes, and (for video)
    // appends the reconstruction to the receiver buffer
    nn::Tensor decode(const phy::SymbolGrid& equalized_payload, GopBuffer& buffer) const;

private:
    void build_image_model(RngStream& init);
    void build_video_model(RngStream& init);
    void build_speech_model(RngStream& init);
    void build_text_model(RngStream& init);

    nn::Var encode_image(nn::Tape& t, nn::Var x, bool pframe, const nn::Var* prev) const;
    nn::Var decode_image(nn::Tape& t, nn::Var sym, bool pframe, const nn::Var* prev) const;
    nn::Var encode_speech(nn::Tape& t, nn::Var x) const;
    nn::Var decode_speech(nn::Tape& t, nn::Var sym) const;
    nn::Var encode_text(nn::Tape& t, nn::Var x) const;
    nn::Var decode_text(nn::Tape& t, nn::Var sym) const;

    CodecSpec spec_;
    nn::ParamStore params_;
    bool soft_mapping_ = false;
    std::string arch_descriptor_;
    TextVocab vocab_;
    FramingConfig framing_;

    // architecture knobs resolved from the variant
    std::size_t h1_ = 0, h2_ = 0, h3_ = 0;
    bool extra_enc_conv_ = false;
    std::size_t out_channels_ = 0; // conv codecs: symbols = 8*8*out_channels_/2
    std::size_t ffn_hidden_ = 0;   // text
    int attn_blocks_ = 1;          // text

    std::vector<nn::Conv2dLayer> enc_convs_, dec_convs_, penc_convs_, pdec_convs_;
    nn::Conv2dLayer dec_out_, pdec_out_;
    nn::LinearLayer enc_fc_, dec_fc_;
    std::vector<nn::AttentionLayer> attn_enc_, attn_dec_;
    nn::LinearLayer ffn_enc_in_, ffn_enc_out_, ffn_dec_in_, ffn_dec_out_;
    nn::LinearLayer row_head_, raw_head_, dec_row_a_, dec_row_b_; // speech per-row coding
    nn::Parameter* embed_ = nullptr;
    nn::LinearLayer tok_out_;
    nn::Tensor posenc_;
};

// ---- training ----
struct ModalityDataset {
    Modality kind = Modality::Image;
    std::vector<nn::Tensor> items;               // image [3,32,32] / speech [1024]
    std::vector<harness::VideoClip> clips;       // video
    std::vector<std::vector<int>> sentences;     // text

    std::size_t size() const;
};

ModalityDataset image_dataset(std::vector<nn::Tensor> images);
ModalityDataset video_dataset(std::vector<harness::VideoClip> clips);
ModalityDataset speech_dataset(std::vector<nn::Tensor> waves);
ModalityDataset text_dataset(std::vector<std::vector<int>> sentences);

struct TrainConfig {
    int epochs = 12;
    std::size_t batch = 8;
    double lr = 2e-3;
    // channel noise curriculum: the first two thirds of the epochs anneal
    // the snr linearly from snr_start_db down to channel.snr_db
    double snr_start_db = 30.0;
    // pulls encoder outputs toward their quantized points, which keeps the
    // straight-through estimator well behaved
    double commit_weight = 0.05;
    // when false, the whole model keeps training in the noisy phase instead
    // of only the decoder
    bool freeze_encoder_in_noise_phase = true;
    // fraction of the run that trains with the relaxed mapper; the
    // commitment weight ramps up through it so the code lands on the grid
    double soft_fraction = 0.25;
    phy::ChannelModel channel;   // includes the operating snr
    phy::OfdmConfig ofdm;
    std::uint64_t seed = 0;
};

struct TrainReport {
    double initial_val_loss = 0.0;
    double final_val_loss = 0.0;
    std::vector<double> epoch_val_losses;
};

// End-to-end training through the frequency-domain channel shortcut
// (LS-estimated equalization, straight-through re-quantization).
TrainReport train_jscc(JsccCodec& codec, const ModalityDataset& train, const ModalityDataset& val,
                       const TrainConfig& cfg);

// copies every parameter whose name and shape match (e.g. seeding a video
// codec's intra path from a trained image codec)
std::size_t warm_start_from(JsccCodec& dst, const JsccCodec& src);

// mean reconstruction loss over a dataset at the given snr (derived streams)
double validation_loss(const JsccCodec& codec, const ModalityDataset& data, const TrainConfig& cfg,
                       std::uint64_t salt = 0);

// item graph used by both training and validation; returns the loss Var.
// Exposed for the attack stack, which reuses the receive-side construction.
struct ChannelDraw {
    phy::ChannelRealization ch;
    std::vector<phy::cd> h_est;           // ls estimate from a noisy preamble
    std::vector<std::size_t> deep_fades;  // zeroed data columns
    phy::SymbolGrid noise_payload;        // per payload row
};

ChannelDraw make_channel_draw(const phy::ChannelModel& model, const phy::OfdmConfig& ofdm,
                              std::size_t payload_rows, RngStream& channel_rng, RngStream& noise_rng);

// same, for an already-sampled transmitter channel
ChannelDraw make_channel_draw(const phy::ChannelRealization& ch, const phy::OfdmConfig& ofdm,
                              std::size_t payload_rows, RngStream& noise_rng);

// equalized compact payload for a mapped payload Var sent through the draw:
// eq[i,j] = (H[k] y[i,j] + W[i,k]) / H_est[k], k = data_subcarriers[perm[j]]
nn::Var receive_payload_var(nn::Tape& t, nn::Var mapped_payload, const ChannelDraw& draw,
                            const phy::OfdmConfig& ofdm, const std::vector<std::size_t>& perm);

} // namespace wsim::jscc

#endif
