// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#include "wsim/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "wsim/rng.hpp"

namespace wsim::harness {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

    std::uint64_t take(int n) {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated: " + path_);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += n;
        return v;
    }
    std::string take_str(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated: " + path_);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    double take_f64() {
        const std::uint64_t bits = take(8);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const std::map<std::string, nn::Tensor>& tensors, const std::string& path) {
    std::string out;
    out += "MGMW";
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.rank()));
        for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.vec()) put_f64(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::map<std::string, nn::Tensor> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(bytes, path);
    if (r.take_str(4) != "MGMW") throw std::runtime_error("checkpoint: bad magic: " + path);
    const auto version = static_cast<std::uint32_t>(r.take(4));
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) + ": " + path);
    const auto count = static_cast<std::uint32_t>(r.take(4));
    std::map<std::string, nn::Tensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = static_cast<std::size_t>(r.take(2));
        const std::string name = r.take_str(name_len);
        const auto rank = static_cast<std::size_t>(r.take(1));
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.take(4));
        nn::Tensor t(shape);
        for (auto& v : t.vec()) v = r.take_f64();
        if (!out.emplace(name, std::move(t)).second)
            throw std::runtime_error("checkpoint: duplicate tensor name " + name + ": " + path);
    }
    if (!r.exhausted()) throw std::runtime_error("checkpoint: trailing bytes: " + path);
    return out;
}

std::uint64_t file_content_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for hashing: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes);
}

} // namespace wsim::harness
