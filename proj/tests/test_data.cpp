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

#include <algorithm>
#include <cmath>
#include <string>

#include "doctest.h"
#include "kcm/dataset.hpp"
#include "test_util.hpp"

namespace kcm {
namespace {

TEST_SUITE("data") {

TEST_CASE("long-tail counts follow the geometric profile") {
  LongTailSpec spec;
  const auto counts = longtail_counts(spec);
  REQUIRE(counts.size() == 10);
  CHECK(counts.front() == 500);
  CHECK(counts.back() == 5);
  for (int c = 0; c < 10; ++c)
    CHECK(counts[c] == std::lround(500.0 * std::pow(100.0, -c / 9.0)));
  CHECK(std::is_sorted(counts.rbegin(), counts.rend()));
}

TEST_CASE("generated dataset has the requested sizes per split") {
  LongTailSpec spec;
  spec.seed = 4;
  const Dataset ds = generate_longtail(spec);
  const auto train = class_histogram(ds.split(Split::kTrain), 10);
  const auto val = class_histogram(ds.split(Split::kVal), 10);
  const auto test = class_histogram(ds.split(Split::kTest), 10);
  CHECK(train == longtail_counts(spec));
  CHECK(train[9] == 5);
  for (int c = 0; c < 10; ++c) {
    CHECK(val[c] == 10);
    CHECK(test[c] == 60);
  }
  std::vector<std::uint64_t> ids;
  for (const Sample& s : ds.samples) {
    ids.push_back(s.id);
    CHECK(s.features.size() == 10);
    CHECK(s.region == ds.class_regions[s.label]);
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("regions split floor(C/3) head and tail, the rest medium") {
  auto count = [](const std::vector<Region>& r, Region x) {
    return std::count(r.begin(), r.end(), x);
  };
  const std::vector<int> nine{90, 80, 70, 60, 50, 40, 30, 20, 10};
  const auto r9 = partition_regions(nine);
  CHECK(count(r9, Region::kHead) == 3);
  CHECK(count(r9, Region::kMed) == 3);
  CHECK(count(r9, Region::kTail) == 3);
  const std::vector<int> ten{100, 90, 80, 70, 60, 50, 40, 30, 20, 10};
  const auto r10 = partition_regions(ten);
  CHECK(count(r10, Region::kHead) == 3);
  CHECK(count(r10, Region::kMed) == 4);
  CHECK(count(r10, Region::kTail) == 3);
  CHECK(r10[0] == Region::kHead);
  CHECK(r10[9] == Region::kTail);
}

TEST_CASE("equal counts fall back to ascending class index") {
  const std::vector<int> flat(6, 40);
  const auto r = partition_regions(flat);
  CHECK(r == std::vector<Region>{Region::kHead, Region::kHead, Region::kMed, Region::kMed,
                                 Region::kTail, Region::kTail});
  // A tie straddling the head boundary: the lower index wins the head slot.
  const auto t = partition_regions(std::vector<int>{10, 50, 50, 50, 5, 1});
  CHECK(t[1] == Region::kHead);
  CHECK(t[2] == Region::kHead);
  CHECK(t[3] == Region::kMed);
}

TEST_CASE("generation is deterministic in the seed") {
  LongTailSpec spec;
  spec.seed = 12;
  const Dataset a = generate_longtail(spec);
  CHECK(generate_longtail(spec) == a);
  CHECK(dataset_hash(generate_longtail(spec)) == dataset_hash(a));
  spec.seed = 13;
  CHECK(dataset_hash(generate_longtail(spec)) != dataset_hash(a));
}

TEST_CASE("CSV round trip preserves every sample bit for bit") {
  LongTailSpec spec;
  spec.seed = 2;
  spec.max_per_class = 50;
  spec.imbalance = 10;
  const Dataset ds = generate_longtail(spec);
  testing::TempDir dir("data");
  write_csv(dir.path() / "d.csv", ds);
  CsvSchema schema{ds.feature_dim, ds.num_classes, ds.class_names};
  const Dataset back = load_csv(dir.path() / "d.csv", schema);
  CHECK(back == ds);
  CHECK(dataset_hash(back) == dataset_hash(ds));

  const CsvSchema from_manifest = schema_from_manifest(manifest_json(ds, &spec));
  CHECK(from_manifest.feature_dim == ds.feature_dim);
  CHECK(from_manifest.num_classes == ds.num_classes);
  CHECK(from_manifest.class_names == ds.class_names);
}

TEST_CASE("CSV errors name the offending line") {
  const CsvSchema schema{2, 3, {}};
  const std::string header = "id,f0,f1,label\n";
  auto message = [&](const std::string& text) {
    try {
      parse_csv(text, schema);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kData);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(header + "0,1.0,abc,1\n").find("line 2") != std::string::npos);
  CHECK(message(header + "0,1.0,2.0,1\n1,1.0,2.0,7\n").find("line 3") != std::string::npos);
  CHECK(message(header + "0,1.0,2.0\n").find("line 2") != std::string::npos);
  CHECK(message("id,f0,label\n").find("line 1") != std::string::npos);
  CHECK(message(header + "0,1,2,0\n0,1,2,1\n").find("duplicate") != std::string::npos);
  CHECK(message("").find("empty") != std::string::npos);
}

TEST_CASE("CSV without a region column derives regions from train counts") {
  std::string text = "id,f0,label\n";
  int id = 0;
  const int counts[3] = {9, 4, 1};
  for (int c = 0; c < 3; ++c)
    for (int n = 0; n < counts[c]; ++n)
      text += std::to_string(id++) + "," + std::to_string(n) + ".5," + std::to_string(c) + "\n";
  const Dataset ds = parse_csv(text, CsvSchema{1, 3, {}});
  CHECK(ds.class_regions == std::vector<Region>{Region::kHead, Region::kMed, Region::kTail});
  CHECK(ds.class_names[2] == "class_2");
  for (const Sample& s : ds.samples) CHECK(s.split == Split::kTrain);
}

TEST_CASE("invalid specs are config errors") {
  LongTailSpec spec;
  spec.num_classes = 2;
  CHECK_THROWS_AS(validate(spec), Error);
  spec = LongTailSpec{};
  spec.imbalance = 0.5;
  CHECK_THROWS_AS(generate_longtail(spec), Error);
  spec = LongTailSpec{};
  spec.max_per_class = 50;
  spec.imbalance = 1000;  // n_min rounds to zero
  CHECK_THROWS_AS(validate(spec), Error);
}

}  // TEST_SUITE

}  // namespace
}  // namespace kcm
