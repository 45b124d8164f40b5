// Copyright (C) 2026 the wsim authors
// SPDX-License-Identifier: Apache-2.0
#ifndef WSIM_CHECKPOINT_HPP
#define WSIM_CHECKPOINT_HPP

#include <map>
#include <string>

#include "wsim/tensor.hpp"

namespace wsim::harness {

// Binary tensor container. Layout, all little-endian:
//   magic "MGMW" | u32 version | u32 tensor count
//   per tensor: u16 name length | name bytes | u8 rank | u32 dims... | f64 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::map<std::string, nn::Tensor>& tensors, const std::string& path);
std::map<std::string, nn::Tensor> load_checkpoint(const std::string& path);

// FNV-1a over the raw file bytes; used to fingerprint run inputs.
std::uint64_t file_content_hash(const std::string& path);

} // namespace wsim::harness

#endif
