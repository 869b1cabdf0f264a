/*
 * Copyright 2026 The mmuq Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Run configuration (JSON). Unknown keys are rejected; every error is
// Error{kConfigError} whose message starts with the JSON pointer of the
// offending field. README.md lists every key.

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "mmuq/backends.hpp"
#include "mmuq/tasks.hpp"

namespace mmuq {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct RunConfig {
  BackendRoleSet roles;
  TaskOptions options;
  std::size_t bin_count = 10;
  std::uint64_t seed = 0;
  // Parsed document with mock_file references inlined; the hash covers it.
  nlohmann::json canonical;
};

// base_dir resolves relative "mock_file" paths.
RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Replaces the seed everywhere it propagates (plan and mock backends
// without an explicit seed) and in the canonical document.
void override_seed(RunConfig& cfg, std::uint64_t seed);

// FNV-1a 64 of canonical.dump(), as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// {"config_hash", "seed", "tool_version"} embedded in every output file.
nlohmann::json run_meta(const RunConfig& cfg);

}  // namespace mmuq
