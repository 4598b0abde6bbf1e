// Copyright 2026 The gpmorse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>

#include "gpmorse/pipeline.hpp"

namespace gpmorse {

inline constexpr int kConfigSchemaVersion = 1;

/// Parses a JSON run configuration. Unknown keys are rejected. Throws ConfigError.
PipelineConfig parse_config(const std::string& json_text);

/// Reads and parses a configuration file. Throws IoError or ConfigError.
PipelineConfig load_config(const std::string& path);

/// Every field spelled out, keys sorted; parse_config(canonical_config(c)) == c.
std::string canonical_config(const PipelineConfig& config);

/// 16 hex digits identifying the canonical configuration.
std::string config_hash(const PipelineConfig& config);

}  // namespace gpmorse
