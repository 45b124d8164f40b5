// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wsim/jscc.hpp"

using namespace wsim;
using namespace wsim::jscc;
using nn::Tensor;

TEST_CASE("symbol budgets follow the coding rate") {
    CHECK(n_symbols(Modality::Image, 6) == 512);
    CHECK(n_payload_rows(Modality::Image, 6) == 11);
    CHECK(n_symbols(Modality::Image, 12) == 256);
    CHECK(n_payload_rows(Modality::Image, 12) == 6);
    CHECK(n_symbols(Modality::Speech, 6) == 171);
    CHECK(n_payload_rows(Modality::Speech, 6) == 4);
    CHECK(n_symbols(Modality::Text, 6) == 32);
    CHECK(n_payload_rows(Modality::Text, 6) == 1);
}

TEST_CASE("payload padding symbols are zero") {
    std::vector<phy::cd> syms(512, phy::cd{1.0, -1.0});
    const phy::SymbolGrid grid = symbols_to_payload(syms);
    CHECK(grid.rows() == 11);
    CHECK(grid.cols() == 48);
    for (std::size_t i = 512; i < grid.size(); ++i) CHECK(std::abs(grid[i]) == 0.0);
    const auto back = payload_to_symbols(grid, 512);
    CHECK(back == syms);
}

TEST_CASE("gop order: sequential structure is the identity") {
    const GopStructure s = sequential_gop(4);
    for (int t = 1; t <= 4; ++t) CHECK(gop_order(s, t) == t);
    CHECK_THROWS(gop_order(s, 0));
    CHECK_THROWS(gop_order(s, 5));
}

TEST_CASE("gop order: hierarchical table and inverse") {
    const GopStructure s = hierarchical_gop4();
    CHECK(gop_order(s, 2) == 3);
    for (int t = 1; t <= 4; ++t) CHECK(gop_order_inverse(s, gop_order(s, t)) == t);
}

TEST_CASE("gop buffer rules") {
    GopBuffer buf(4);
    CHECK(buf.empty());
    for (int i = 0; i < 4; ++i) buf.push(Tensor({1}));
    CHECK(buf.size() == 4);
    CHECK_THROWS_WITH_AS(buf.push(Tensor({1})), doctest::Contains("overflow"), std::runtime_error);
    buf.clear();
    CHECK(buf.empty());
    CHECK_THROWS(buf.last());
}

TEST_CASE("speech framing is an exact inverse pair") {
    FramingConfig cfg;
    RngStream rng(3);
    Tensor x({1024});
    for (auto& v : x.vec()) v = rng.uniform(-1, 1);
    const Tensor framed = speech_frame(x, cfg);
    CHECK(framed.shape() == std::vector<std::size_t>{16, 64});
    const Tensor back = speech_deframe(framed, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == x[i]);
    Tensor zeros({1024});
    const Tensor fz = speech_frame(zeros, cfg);
    for (std::size_t i = 0; i < fz.size(); ++i) CHECK(fz[i] == 0.0);
    CHECK_THROWS(speech_frame(Tensor({100}), cfg));
}

TEST_CASE("one-hot text round-trips through the greedy decoder") {
    TextVocab vocab;
    const std::vector<int> sentence{5, 9, 3, 44, 61, 17};
    const Tensor onehot = text_onehot(sentence, vocab);
    CHECK(text_greedy_decode(onehot, vocab) == sentence);
    // max-length sentence has no end marker but still round-trips
    std::vector<int> full(12, 7);
    CHECK(text_greedy_decode(text_onehot(full, vocab), vocab) == full);
}

TEST_CASE("all-equal logits decode to token 0 repeated to max length") {
    TextVocab vocab;
    Tensor logits({12, 64});
    logits.fill(0.25);
    const auto out = text_greedy_decode(logits, vocab);
    REQUIRE(out.size() == 12);
    for (int tok : out) CHECK(tok == 0);
}

TEST_CASE("greedy decoding matches an independent per-position argmax") {
    TextVocab vocab;
    RngStream rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor logits({12, 64});
        for (auto& v : logits.vec()) v = rng.uniform(-2, 2);
        const auto got = text_greedy_decode(logits, vocab);
        std::vector<int> expect;
        for (std::size_t p = 0; p < 12; ++p) {
            int best = 0;
            for (int v = 0; v < 64; ++v)
                if (logits[p * 64 + v] > logits[p * 64 + best]) best = v;
            if (best == vocab.end) break;
            expect.push_back(best);
        }
        CHECK(got == expect);
    }
}

TEST_CASE("untrained codecs produce finite output of the right shape") {
    RngStream data_rng(7);
    for (Modality q : {Modality::Image, Modality::Speech, Modality::Text}) {
        CodecSpec spec;
        spec.q = q;
        const JsccCodec codec(spec, 11);
        GopBuffer buf;
        Tensor x;
        if (q == Modality::Image) {
            x = Tensor({3, 32, 32});
            for (auto& v : x.vec()) v = data_rng.uniform();
        } else if (q == Modality::Speech) {
            x = Tensor({1, 16, 64});
            for (auto& v : x.vec()) v = data_rng.uniform(-1, 1);
        } else {
            x = text_onehot({4, 5, 6, 7}, codec.vocab());
        }
        const phy::SymbolGrid payload = codec.encode(x, buf);
        CHECK(payload.rows() == codec.payload_rows());
        CHECK(payload.cols() == 48);
        GopBuffer rxbuf;
        const Tensor recon = codec.decode(payload, rxbuf);
        CHECK(recon.all_finite());
        if (q == Modality::Text)
            CHECK(recon.shape() == std::vector<std::size_t>{12, 64});
        else
            CHECK(recon.shape() == x.shape());
    }
}

TEST_CASE("the first video frame routes through the image path and fills the buffer") {
    CodecSpec spec;
    spec.q = Modality::Video;
    const JsccCodec codec(spec, 13);
    RngStream rng(8);
    Tensor frame({3, 32, 32});
    for (auto& v : frame.vec()) v = rng.uniform();
    GopBuffer buf;
    const phy::SymbolGrid g1 = codec.encode(frame, buf);
    CHECK(buf.size() == 1); // locally decoded reference appended
    CHECK(g1.rows() == codec.payload_rows());
    const phy::SymbolGrid g2 = codec.encode(frame, buf); // now a p-frame
    CHECK(buf.size() == 2);
    CHECK(g2.rows() == codec.payload_rows());
}

TEST_CASE("non-video codecs reject a nonempty buffer") {
    CodecSpec spec;
    spec.q = Modality::Image;
    const JsccCodec codec(spec, 17);
    GopBuffer buf;
    buf.push(Tensor({1}));
    Tensor x({3, 32, 32});
    CHECK_THROWS(codec.encode(x, buf));
}

TEST_CASE("encode rejects wrong modality shapes") {
    CodecSpec spec;
    spec.q = Modality::Image;
    const JsccCodec codec(spec, 19);
    GopBuffer buf;
    CHECK_THROWS(codec.encode(Tensor({3, 16, 16}), buf));
}

TEST_CASE("decode rejects a row-count mismatch") {
    CodecSpec spec;
    spec.q = Modality::Image;
    const JsccCodec codec(spec, 23);
    GopBuffer buf;
    CHECK_THROWS(codec.decode(phy::SymbolGrid(3, 48), buf));
}

TEST_CASE("codec construction is deterministic in the seed") {
    CodecSpec spec;
    spec.q = Modality::Speech;
    const JsccCodec a(spec, 31), b(spec, 31), c(spec, 32);
    const auto ta = a.params().to_tensors();
    const auto tb = b.params().to_tensors();
    const auto tc = c.params().to_tensors();
    bool all_equal = true, any_diff = false;
    for (const auto& [name, t] : ta) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] != tb.at(name)[i]) all_equal = false;
            if (t[i] != tc.at(name)[i]) any_diff = true;
        }
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("surrogate variants differ architecturally from the target") {
    for (Modality q : {Modality::Image, Modality::Video, Modality::Speech, Modality::Text}) {
        CodecSpec t{q, phy::Constellation::Qam16, 6, ArchVariant::Target};
        CodecSpec n{q, phy::Constellation::Qam16, 6, ArchVariant::Narrow};
        CodecSpec w{q, phy::Constellation::Qam16, 6, ArchVariant::Wide};
        const JsccCodec ct(t, 1), cn(n, 1), cw(w, 1);
        CHECK(ct.arch_descriptor() != cn.arch_descriptor());
        CHECK(ct.arch_descriptor() != cw.arch_descriptor());
        // the symbol budget is variant-independent
        CHECK(ct.symbol_count() == cn.symbol_count());
        CHECK(ct.symbol_count() == cw.symbol_count());
    }
}
