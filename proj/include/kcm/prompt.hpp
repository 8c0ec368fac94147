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

#ifndef KCM_PROMPT_HPP_
#define KCM_PROMPT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kcm {

struct RankedClass {
  int index = 0;
  std::string name;
  double probability = 0.0;
};

// Annotation attached to every large-model request: the judgment model's
// confidence plus the small model's ranked classes, so the large model can
// discount the classes the small model already covers.
struct PromptAugmentation {
  std::uint64_t sample_id = 0;
  double small_model_confidence = 0.0;
  std::vector<RankedClass> small_model_top_classes;
  std::string template_text;
};

inline constexpr int kDefaultPromptTopK = 3;

// Ranks classes by descending probability, ties by ascending index, keeps
// the first top_k, and renders the fixed template with the confidence to
// four decimals. Deterministic for fixed inputs.
PromptAugmentation build_prompt(std::uint64_t sample_id, std::span<const double> small_distribution,
                                double confidence, std::span<const std::string> class_names,
                                int top_k = kDefaultPromptTopK);

}  // namespace kcm

#endif  // KCM_PROMPT_HPP_
