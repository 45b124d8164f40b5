// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "wsim/checkpoint.hpp"
#include "wsim/rng.hpp"

using namespace wsim::harness;
using wsim::nn::Tensor;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/wsim_ckpt_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("checkpoint round-trips bit-exactly") {
    wsim::RngStream rng(1);
    std::map<std::string, Tensor> tensors;
    Tensor a({2, 3});
    for (auto& v : a.vec()) v = rng.uniform(-10, 10);
    Tensor b({4});
    for (auto& v : b.vec()) v = rng.gaussian() * 1e-17;
    tensors.emplace("enc.w", a);
    tensors.emplace("enc.b", b);
    TempFile f("roundtrip");
    save_checkpoint(tensors, f.path);
    const auto back = load_checkpoint(f.path);
    REQUIRE(back.size() == 2);
    CHECK(back.at("enc.w").shape() == a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(back.at("enc.w")[i] == a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(back.at("enc.b")[i] == b[i]);
}

TEST_CASE("corrupted magic is rejected") {
    TempFile f("magic");
    save_checkpoint({}, f.path);
    {
        std::fstream s(f.path, std::ios::in | std::ios::out | std::ios::binary);
        s.seekp(0);
        s.put('X');
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(f.path), doctest::Contains("bad magic"), std::runtime_error);
}

TEST_CASE("unsupported version is rejected") {
    TempFile f("version");
    save_checkpoint({}, f.path);
    {
        std::fstream s(f.path, std::ios::in | std::ios::out | std::ios::binary);
        s.seekp(4);
        s.put(static_cast<char>(99));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(f.path), doctest::Contains("version"), std::runtime_error);
}

TEST_CASE("truncated file is rejected") {
    TempFile f("trunc");
    std::map<std::string, Tensor> tensors;
    tensors.emplace("w", Tensor({8, 8}));
    save_checkpoint(tensors, f.path);
    std::ifstream in(f.path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(f.path), doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("empty tensor set is a valid file with count zero") {
    TempFile f("empty");
    save_checkpoint({}, f.path);
    CHECK(load_checkpoint(f.path).empty());
}

TEST_CASE("content hash is stable and content-sensitive") {
    TempFile f1("hash1"), f2("hash2");
    std::map<std::string, Tensor> tensors;
    tensors.emplace("w", Tensor({2}, {1.0, 2.0}));
    save_checkpoint(tensors, f1.path);
    save_checkpoint(tensors, f2.path);
    CHECK(file_content_hash(f1.path) == file_content_hash(f2.path));
    tensors.at("w")[0] = 3.0;
    save_checkpoint(tensors, f2.path);
    CHECK(file_content_hash(f1.path) != file_content_hash(f2.path));
}
