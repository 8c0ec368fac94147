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

#ifndef KCM_DATASET_HPP_
#define KCM_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kcm/common.hpp"

namespace kcm {

enum class Region { kHead, kMed, kTail, kUnknown };
enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Region r);
std::string_view to_string(Split s);
Region parse_region(std::string_view s);
Split parse_split(std::string_view s);

struct Sample {
  std::uint64_t id = 0;
  std::vector<double> features;
  int label = 0;
  Region region = Region::kUnknown;
  Split split = Split::kTrain;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<std::string> class_names;
  std::vector<Region> class_regions;
  std::vector<Sample> samples;

  std::vector<Sample> split(Split s) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Matrix feature_matrix(std::span<const Sample> samples);
std::vector<int> class_histogram(std::span<const Sample> samples, int num_classes);

struct LongTailSpec {
  int num_classes = 10;
  int feature_dim = 10;
  int max_per_class = 500;
  double imbalance = 100.0;  // n_max / n_min
  double separation = 4.0;   // distance between any two class centers
  double noise = 1.0;        // per-feature standard deviation
  int val_per_class = 10;
  int test_per_class = 60;
  std::uint64_t seed = 0;
};

void validate(const LongTailSpec& spec);
// n_c = round(n_max * rho^(-c / (C - 1))).
std::vector<int> longtail_counts(const LongTailSpec& spec);
// Gaussian cluster per class around the vertices of a regular simplex.
// Class c is named "<region>_<c>".
Dataset generate_longtail(const LongTailSpec& spec);

// Sorts classes by descending count (ties by ascending class index) and
// assigns the top floor(C/3) to Head, the bottom floor(C/3) to Tail and the
// rest to Med.
std::vector<Region> partition_regions(std::span<const int> class_counts);

// CSV columns: id, f0..f{d-1}, label[, split][, region]. Labels are integer
// class indices. Without a region column, regions come from the train-split
// class counts.
struct CsvSchema {
  int feature_dim = 0;
  int num_classes = 0;
  std::vector<std::string> class_names;  // optional; defaults to class_<i>
};

std::string dataset_to_csv(const Dataset& ds);
void write_csv(const std::filesystem::path& path, const Dataset& ds);
Dataset parse_csv(std::string_view text, const CsvSchema& schema);
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

// Fingerprint of the canonical CSV encoding.
std::string dataset_hash(const Dataset& ds);

// JSON manifest stored next to a dataset file: generation spec (if any),
// class names, per-split histograms and the dataset hash.
std::string manifest_json(const Dataset& ds, const LongTailSpec* spec);
// Reads class names and sizes back from a manifest.
CsvSchema schema_from_manifest(std::string_view manifest_text);

}  // namespace kcm

#endif  // KCM_DATASET_HPP_
