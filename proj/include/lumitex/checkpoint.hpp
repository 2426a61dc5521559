// Copyright (c) 2026 lumitex contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "lumitex/nn.hpp"

namespace lumitex {

// Checkpoint layout (bytes):
//   magic "LXCK1\n"
//   u64   little-endian header byte length
//   JSON  header: {"tensors":[{"name","shape","frozen","role"}...],"meta":{...}}
//   data  per header entry, row-major fp64, little-endian
// Optimizer moments are stored as role "opt" entries named
// "<param>.adam_m" / "<param>.adam_v"; meta carries adam_step and rng_state.
void save_checkpoint(const std::string& path, const ParamStore& store, const Adam* opt,
                     const nlohmann::json& meta);

// Loads values into an already-constructed store (matched by name; shape
// checked). Restores frozen flags and, when opt is given, its moments.
// Returns the meta block.
nlohmann::json load_checkpoint(const std::string& path, ParamStore& store, Adam* opt);

nlohmann::json peek_checkpoint_meta(const std::string& path);

bool file_exists(const std::string& path);

}  // namespace lumitex
