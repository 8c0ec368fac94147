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

#include "kcm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "kcm/serialize.hpp"

namespace kcm {

std::string_view to_string(Region r) {
  switch (r) {
    case Region::kHead:
      return "head";
    case Region::kMed:
      return "med";
    case Region::kTail:
      return "tail";
    case Region::kUnknown:
      return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Region parse_region(std::string_view s) {
  if (s == "head") return Region::kHead;
  if (s == "med") return Region::kMed;
  if (s == "tail") return Region::kTail;
  fail(ErrorKind::kData, "unknown region tag '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  fail(ErrorKind::kData, "unknown split '" + std::string(s) + "'");
}

std::vector<Sample> Dataset::split(Split s) const {
  std::vector<Sample> out;
  for (const Sample& x : samples)
    if (x.split == s) out.push_back(x);
  return out;
}

Matrix feature_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return {};
  Matrix m(samples.size(), samples.front().features.size());
  for (std::size_t n = 0; n < samples.size(); ++n) {
    require(samples[n].features.size() == m.cols(), ErrorKind::kData,
            "inconsistent feature width in sample " + std::to_string(samples[n].id));
    std::copy(samples[n].features.begin(), samples[n].features.end(), m.row(n).begin());
  }
  return m;
}

std::vector<int> class_histogram(std::span<const Sample> samples, int num_classes) {
  std::vector<int> h(num_classes, 0);
  for (const Sample& s : samples)
    if (s.label >= 0 && s.label < num_classes) ++h[s.label];
  return h;
}

void validate(const LongTailSpec& spec) {
  require(spec.num_classes >= 3, ErrorKind::kConfig, "long-tail spec needs at least 3 classes");
  require(spec.imbalance >= 1.0, ErrorKind::kConfig, "imbalance factor must be >= 1");
  require(spec.max_per_class >= 1, ErrorKind::kConfig, "max_per_class must be positive");
  require(spec.feature_dim >= spec.num_classes - 1, ErrorKind::kConfig,
          "feature_dim must be at least num_classes - 1 to hold the class simplex");
  require(spec.val_per_class >= 0 && spec.test_per_class >= 1, ErrorKind::kConfig,
          "test_per_class must be positive and val_per_class nonnegative");
  require(spec.noise >= 0.0 && spec.separation >= 0.0, ErrorKind::kConfig,
          "noise and separation must be nonnegative");
  const double n_min = spec.max_per_class / spec.imbalance;
  require(std::lround(n_min) >= 1, ErrorKind::kConfig,
          "infeasible long-tail spec: smallest class would have fewer than 1 sample");
}

std::vector<int> longtail_counts(const LongTailSpec& spec) {
  validate(spec);
  std::vector<int> counts(spec.num_classes);
  const double denom = static_cast<double>(spec.num_classes - 1);
  for (int c = 0; c < spec.num_classes; ++c)
    counts[c] = static_cast<int>(
        std::lround(spec.max_per_class * std::pow(spec.imbalance, -c / denom)));
  return counts;
}

std::vector<Region> partition_regions(std::span<const int> class_counts) {
  const int c = static_cast<int>(class_counts.size());
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return class_counts[a] > class_counts[b]; });
  const int third = c / 3;
  std::vector<Region> regions(c, Region::kMed);
  for (int r = 0; r < c; ++r) {
    if (r < third)
      regions[order[r]] = Region::kHead;
    else if (r >= c - third)
      regions[order[r]] = Region::kTail;
  }
  return regions;
}

namespace {

// Vertices of a regular simplex with unit edge length, embedded in the first
// C-1 coordinates via the Helmert basis.
std::vector<std::vector<double>> SimplexCenters(int classes, int dim, double edge) {
  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim, 0.0));
  const double scale = edge / std::sqrt(2.0);
  for (int m = 1; m < classes; ++m) {
    const double norm = std::sqrt(static_cast<double>(m) * (m + 1));
    for (int c = 0; c < classes; ++c) {
      double v = 0.0;
      if (c < m)
        v = 1.0 / norm;
      else if (c == m)
        v = -m / norm;
      centers[c][m - 1] = scale * v;
    }
  }
  return centers;
}

void FillClassNames(Dataset& ds) {
  ds.class_names.clear();
  for (int c = 0; c < ds.num_classes; ++c)
    ds.class_names.push_back(std::string(to_string(ds.class_regions[c])) + "_" + std::to_string(c));
}

}  // namespace

Dataset generate_longtail(const LongTailSpec& spec) {
  const std::vector<int> counts = longtail_counts(spec);
  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.feature_dim = spec.feature_dim;
  ds.class_regions = partition_regions(counts);
  FillClassNames(ds);

  const auto centers = SimplexCenters(spec.num_classes, spec.feature_dim, spec.separation);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uint64_t next_id = 0;
  auto emit = [&](int c, Split split) {
    Sample s;
    s.id = next_id++;
    s.label = c;
    s.region = ds.class_regions[c];
    s.split = split;
    s.features.resize(spec.feature_dim);
    for (int f = 0; f < spec.feature_dim; ++f) s.features[f] = centers[c][f] + spec.noise * gauss(rng);
    ds.samples.push_back(std::move(s));
  };
  for (int c = 0; c < spec.num_classes; ++c)
    for (int n = 0; n < counts[c]; ++n) emit(c, Split::kTrain);
  for (int c = 0; c < spec.num_classes; ++c)
    for (int n = 0; n < spec.val_per_class; ++n) emit(c, Split::kVal);
  for (int c = 0; c < spec.num_classes; ++c)
    for (int n = 0; n < spec.test_per_class; ++n) emit(c, Split::kTest);
  return ds;
}

std::string dataset_to_csv(const Dataset& ds) {
  std::string out = "id";
  for (int f = 0; f < ds.feature_dim; ++f) out += ",f" + std::to_string(f);
  out += ",label,split,region\n";
  for (const Sample& s : ds.samples) {
    out += std::to_string(s.id);
    for (double v : s.features) {
      out += ',';
      out += format_double(v);
    }
    out += ',' + std::to_string(s.label);
    out += ',';
    out += to_string(s.split);
    out += ',';
    out += to_string(s.region);
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  write_file(path, dataset_to_csv(ds));
}

namespace {

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                             : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
      f.remove_suffix(1);
    fields.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void LineError(std::size_t line, const std::string& what) {
  fail(ErrorKind::kData, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvSchema& schema) {
  require(schema.feature_dim >= 1 && schema.num_classes >= 1, ErrorKind::kConfig,
          "CSV schema needs feature_dim and num_classes");
  Dataset ds;
  ds.num_classes = schema.num_classes;
  ds.feature_dim = schema.feature_dim;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  bool has_split = false;
  bool has_region = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = SplitFields(line);

    if (!header_seen) {
      header_seen = true;
      const std::size_t base = static_cast<std::size_t>(schema.feature_dim) + 2;
      if (fields.size() < base) LineError(line_no, "header is missing columns");
      if (fields[0] != "id") LineError(line_no, "first column must be 'id'");
      for (int f = 0; f < schema.feature_dim; ++f)
        if (fields[1 + f] != "f" + std::to_string(f))
          LineError(line_no, "missing column f" + std::to_string(f));
      if (fields[base - 1] != "label") LineError(line_no, "missing column 'label'");
      std::size_t next = base;
      if (next < fields.size() && fields[next] == "split") {
        has_split = true;
        ++next;
      }
      if (next < fields.size() && fields[next] == "region") {
        has_region = true;
        ++next;
      }
      if (next != fields.size())
        LineError(line_no, "unexpected column '" + std::string(fields[next]) + "'");
      continue;
    }

    const std::size_t expected = static_cast<std::size_t>(schema.feature_dim) + 2 +
                                 (has_split ? 1 : 0) + (has_region ? 1 : 0);
    if (fields.size() != expected)
      LineError(line_no, "expected " + std::to_string(expected) + " fields, got " +
                             std::to_string(fields.size()));
    Sample s;
    {
      auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), s.id);
      if (ec != std::errc() || p != fields[0].data() + fields[0].size())
        LineError(line_no, "non-numeric id '" + std::string(fields[0]) + "'");
    }
    s.features.resize(schema.feature_dim);
    for (int f = 0; f < schema.feature_dim; ++f) {
      std::string_view field = fields[1 + f];
      auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), s.features[f]);
      if (ec != std::errc() || p != field.data() + field.size() || !std::isfinite(s.features[f]))
        LineError(line_no, "non-numeric feature f" + std::to_string(f) + " '" + std::string(field) + "'");
    }
    std::string_view label = fields[1 + schema.feature_dim];
    auto [p, ec] = std::from_chars(label.data(), label.data() + label.size(), s.label);
    if (ec != std::errc() || p != label.data() + label.size() || s.label < 0 ||
        s.label >= schema.num_classes)
      LineError(line_no, "unknown label '" + std::string(label) + "'");
    std::size_t next = static_cast<std::size_t>(schema.feature_dim) + 2;
    try {
      if (has_split) s.split = parse_split(fields[next++]);
      if (has_region) s.region = parse_region(fields[next++]);
    } catch (const Error& e) {
      LineError(line_no, e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  require(header_seen, ErrorKind::kData, "CSV file is empty");

  {
    std::vector<std::uint64_t> ids;
    for (const Sample& s : ds.samples) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorKind::kData,
            "duplicate sample id in CSV");
  }

  // Class regions: from the region column when every class is tagged
  // consistently, otherwise from the train-split count profile.
  ds.class_regions.assign(ds.num_classes, Region::kUnknown);
  bool consistent = has_region;
  if (has_region) {
    for (const Sample& s : ds.samples) {
      Region& r = ds.class_regions[s.label];
      if (r == Region::kUnknown)
        r = s.region;
      else if (r != s.region)
        consistent = false;
    }
  }
  if (!consistent || std::count(ds.class_regions.begin(), ds.class_regions.end(), Region::kUnknown)) {
    const std::vector<Sample> train = ds.split(Split::kTrain);
    std::vector<int> counts = class_histogram(train.empty() ? ds.samples : train, ds.num_classes);
    ds.class_regions = partition_regions(counts);
    for (Sample& s : ds.samples) s.region = ds.class_regions[s.label];
  }
  if (!schema.class_names.empty()) {
    require(static_cast<int>(schema.class_names.size()) == ds.num_classes, ErrorKind::kConfig,
            "class name list does not match num_classes");
    ds.class_names = schema.class_names;
  } else {
    for (int c = 0; c < ds.num_classes; ++c) ds.class_names.push_back("class_" + std::to_string(c));
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  return parse_csv(read_file(path), schema);
}

std::string dataset_hash(const Dataset& ds) {
  Fnv1a h;
  h.update(dataset_to_csv(ds));
  return h.hex();
}

std::string manifest_json(const Dataset& ds, const LongTailSpec* spec) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["num_classes"] = ds.num_classes;
  j["feature_dim"] = ds.feature_dim;
  j["class_names"] = ds.class_names;
  std::vector<std::string> regions;
  for (Region r : ds.class_regions) regions.emplace_back(to_string(r));
  j["class_regions"] = regions;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto part = ds.split(s);
    j["histogram"][std::string(to_string(s))] = class_histogram(part, ds.num_classes);
  }
  j["dataset_hash"] = dataset_hash(ds);
  if (spec != nullptr) {
    nlohmann::ordered_json g;
    g["num_classes"] = spec->num_classes;
    g["feature_dim"] = spec->feature_dim;
    g["max_per_class"] = spec->max_per_class;
    g["imbalance"] = spec->imbalance;
    g["separation"] = spec->separation;
    g["noise"] = spec->noise;
    g["val_per_class"] = spec->val_per_class;
    g["test_per_class"] = spec->test_per_class;
    g["seed"] = spec->seed;
    j["generator"] = g;
  }
  return j.dump(2) + "\n";
}

CsvSchema schema_from_manifest(std::string_view manifest_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed dataset manifest: ") + e.what());
  }
  CsvSchema schema;
  try {
    schema.feature_dim = j.at("feature_dim").get<int>();
    schema.num_classes = j.at("num_classes").get<int>();
    if (j.contains("class_names")) schema.class_names = j["class_names"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("dataset manifest missing fields: ") + e.what());
  }
  return schema;
}

}  // namespace kcm
