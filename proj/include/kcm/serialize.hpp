// Copyright 2026 The KCM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KCM_SERIALIZE_HPP_
#define KCM_SERIALIZE_HPP_

// Binary model files.
//
//   offset  field
//   0       magic "KCMNET\0\0"
//   8       u32 format version (currently 1)
//   12      u32 kind (0 = KAN, 1 = MLP)
//   16      u32 layer count L
//   20      u32 widths[L + 1]
//   ...     KAN only: u32 order, u32 intervals, f64 lo, f64 hi
//   ...     u64 parameter count P, then P f64 parameters, layer by layer
//
// All integers and floats are little-endian; floats are IEEE-754 binary64, so
// a save/load round trip is bit-exact.

#include <filesystem>
#include <string>
#include <variant>

#include "kcm/kan.hpp"
#include "kcm/mlp.hpp"

namespace kcm {

using AnyNetwork = std::variant<KanNetwork, MlpNetwork>;

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string encode_network(const AnyNetwork& net);
AnyNetwork decode_network(std::string_view bytes);

void save_network(const std::filesystem::path& path, const AnyNetwork& net);
AnyNetwork load_network(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace kcm

#endif  // KCM_SERIALIZE_HPP_
