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
#include <numeric>
#include <random>
#include <set>
#include <type_traits>

#include "kcm/eval.hpp"
#include "kcm/mlp.hpp"
#include "kcm/simd.hpp"

namespace kcm {

void check_disjoint_phases(std::span<const std::vector<int>> phase_classes) {
  std::set<int> seen;
  for (std::size_t p = 0; p < phase_classes.size(); ++p)
    for (int c : phase_classes[p])
      require(seen.insert(c).second, ErrorKind::kInvalidArgument,
              "class " + std::to_string(c) + " appears in more than one phase (phase " +
                  std::to_string(p) + ")");
}

double forgetting_score(const std::vector<std::vector<std::optional<double>>>& retention) {
  const std::size_t phases = retention.size();
  require(phases >= 1, ErrorKind::kInvalidArgument, "retention matrix is empty");
  double total = 0.0;
  for (std::size_t j = 0; j < phases; ++j) {
    double best = 0.0;
    for (std::size_t i = j; i < phases; ++i) {
      require(retention[i].size() == phases && retention[i][j].has_value(),
              ErrorKind::kInvalidArgument,
              "retention matrix lacks task " + std::to_string(j) + " after phase " +
                  std::to_string(i));
      best = std::max(best, *retention[i][j]);
    }
    total += best - *retention[phases - 1][j];
  }
  return total / static_cast<double>(phases);
}

namespace {

// Builds the per-phase model: a single KAN layer (or its capacity-matched
// MLP) for the 1-D task, a hidden-layer classifier for the class subsets.
ClassifierHandle MakeModel(ModelKind kind, const std::vector<int>& kan_dims, int intervals,
                           const Normalization& norm, std::uint64_t seed, std::vector<int>& dims) {
  ArchSpec arch;
  arch.kind = kind;
  arch.intervals = intervals;
  dims = kan_dims;
  if (kind == ModelKind::kMlp)
    dims = match_capacity_dims(KanShape{kan_dims, arch.order, arch.intervals, arch.lo, arch.hi});
  arch.hidden.assign(dims.begin() + 1, dims.end() - 1);
  return make_classifier(arch, norm, dims.back(), seed);
}

// One SGD step on 0.5 * mean squared error. With train_scales off, a KAN
// only updates its spline coefficients; base and spline scales stay put.
double MseStep(AnyNetwork& net, const Matrix& x, std::span<const double> y, double lr,
               bool train_scales) {
  return std::visit(
      [&](auto& n) {
        ForwardCache cache;
        const Matrix z = n.forward(x, cache);
        const std::size_t b = x.rows();
        Matrix grad(b, 1);
        double sum = 0.0;
        for (std::size_t q = 0; q < b; ++q) {
          const double e = z(q, 0) - y[q];
          grad(q, 0) = e / static_cast<double>(b);
          sum += 0.5 * e * e;
        }
        Gradients g = n.zero_gradients();
        n.backward(cache, grad, g);
        if constexpr (std::is_same_v<std::decay_t<decltype(n)>, KanNetwork>) {
          if (!train_scales) {
            const auto& dims = n.shape().dims;
            for (std::size_t l = 0; l < g.size(); ++l) {
              const std::size_t scales = 2 * static_cast<std::size_t>(dims[l] * dims[l + 1]);
              std::fill(g[l].end() - static_cast<std::ptrdiff_t>(scales), g[l].end(), 0.0);
            }
          }
        }
        auto blocks = n.parameter_blocks();
        for (std::size_t l = 0; l < blocks.size(); ++l) simd::axpy(-lr, g[l], blocks[l]);
        return sum / static_cast<double>(b);
      },
      net);
}

struct RegressionTask {
  std::vector<double> train_x;
  std::vector<double> eval_x;
};

ForgettingReport RunRegression(const ForgettingConfig& cfg) {
  const int phases = cfg.phases;
  const double width = 2.0 / phases;
  const double sigma = width / 6.0;
  auto target = [&](double x) {
    double y = 0.0;
    for (int p = 0; p < phases; ++p) {
      const double d = x - (-1.0 + (p + 0.5) * width);
      y += std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return y;
  };

  std::mt19937_64 rng(cfg.seed);
  std::vector<RegressionTask> tasks(phases);
  for (int p = 0; p < phases; ++p) {
    const double lo = -1.0 + p * width;
    for (int n = 0; n < cfg.samples_per_phase; ++n)
      tasks[p].train_x.push_back(lo + unit_interval(rng()) * width);
    for (int n = 0; n < cfg.eval_points_per_phase; ++n)
      tasks[p].eval_x.push_back(lo + (n + 0.5) / cfg.eval_points_per_phase * width);
  }

  Normalization identity{{0.0}, {1.0}, -1.0, 1.0};
  ForgettingReport rep;
  ClassifierHandle model =
      MakeModel(cfg.kind, {1, 1}, cfg.intervals, identity, splitmix64(cfg.seed), rep.dims);
  rep.parameter_count = model.parameter_count();

  auto retained = [&](const RegressionTask& t) {
    Matrix x(t.eval_x.size(), 1);
    for (std::size_t n = 0; n < t.eval_x.size(); ++n) x(n, 0) = t.eval_x[n];
    const Matrix z = model.logits(x);
    std::size_t hits = 0;
    for (std::size_t n = 0; n < t.eval_x.size(); ++n)
      hits += std::abs(z(n, 0) - target(t.eval_x[n])) < cfg.tolerance;
    return static_cast<double>(hits) / static_cast<double>(t.eval_x.size());
  };

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (int phase = 0; phase < phases; ++phase) {
    if (!cfg.frozen) {
      const auto& xs = tasks[phase].train_x;
      std::vector<std::size_t> order(xs.size());
      std::iota(order.begin(), order.end(), 0);
      for (int epoch = 0; epoch < cfg.epochs_per_phase; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += bs) {
          const std::size_t b = std::min(order.size(), start + bs) - start;
          Matrix batch(b, 1);
          std::vector<double> y(b);
          for (std::size_t q = 0; q < b; ++q) {
            batch(q, 0) = xs[order[start + q]];
            y[q] = target(batch(q, 0));
          }
          const double loss = MseStep(model.network(), batch, y, cfg.learning_rate,
                                      cfg.train_kan_scales);
          require(std::isfinite(loss), ErrorKind::kNumerical,
                  "forgetting benchmark diverged in phase " + std::to_string(phase));
        }
      }
    }
    std::vector<std::optional<double>> row(phases);
    for (int j = 0; j <= phase; ++j) row[j] = retained(tasks[j]);
    rep.retention.push_back(std::move(row));
  }
  return rep;
}

ForgettingReport RunClassSubsets(const ForgettingConfig& cfg) {
  const int phases = cfg.phases;
  LongTailSpec spec;
  spec.num_classes = std::max(3, 2 * phases);
  spec.feature_dim = spec.num_classes;
  spec.max_per_class = 100;
  spec.imbalance = 1.0;
  spec.test_per_class = 50;
  spec.seed = cfg.seed;
  const Dataset ds = generate_longtail(spec);

  std::vector<std::vector<int>> phase_classes(phases);
  for (int c = 0; c < spec.num_classes; ++c) phase_classes[std::min(c / 2, phases - 1)].push_back(c);
  check_disjoint_phases(phase_classes);

  const std::vector<Sample> train = ds.split(Split::kTrain);
  const std::vector<Sample> test = ds.split(Split::kTest);
  auto select = [&](const std::vector<Sample>& from, int phase) {
    std::vector<Sample> out;
    const auto& cls = phase_classes[phase];
    for (const Sample& s : from)
      if (std::find(cls.begin(), cls.end(), s.label) != cls.end()) out.push_back(s);
    return out;
  };

  ArchSpec base;
  const Normalization norm =
      Normalization::fit(feature_matrix(train), base.input_spread, base.lo, base.hi);
  ForgettingReport rep;
  ClassifierHandle model = MakeModel(cfg.kind, {spec.feature_dim, 16, spec.num_classes},
                                     base.intervals, norm, splitmix64(cfg.seed), rep.dims);
  rep.parameter_count = model.parameter_count();

  const TrainOptions opts{cfg.epochs_per_phase, cfg.learning_rate, cfg.batch_size};
  for (int phase = 0; phase < phases; ++phase) {
    if (!cfg.frozen)
      fit_supervised(model, select(train, phase), opts, splitmix64(cfg.seed + 1 + phase));
    std::vector<std::optional<double>> row(phases);
    for (int j = 0; j <= phase; ++j) row[j] = accuracy(model, select(test, j));
    rep.retention.push_back(std::move(row));
  }
  return rep;
}

}  // namespace

ForgettingReport run_forgetting_benchmark(const ForgettingConfig& cfg) {
  require(cfg.phases >= 1, ErrorKind::kConfig, "the forgetting benchmark needs at least one phase");
  require(cfg.epochs_per_phase >= 0 && cfg.batch_size >= 1 && cfg.learning_rate > 0.0 &&
              cfg.samples_per_phase >= 1 && cfg.eval_points_per_phase >= 1 && cfg.intervals >= 1,
          ErrorKind::kConfig, "invalid forgetting benchmark settings");
  ForgettingReport rep = cfg.variant == ForgettingVariant::kRegression ? RunRegression(cfg)
                                                                       : RunClassSubsets(cfg);
  rep.model_kind = std::string(to_string(cfg.kind));
  rep.variant = std::string(to_string(cfg.variant));
  rep.phases = cfg.phases;
  rep.seed = cfg.seed;
  rep.frozen = cfg.frozen;
  rep.score = forgetting_score(rep.retention);
  return rep;
}

ForgettingReport run_forgetting_benchmark(ModelKind kind, int phases, std::uint64_t seed) {
  ForgettingConfig cfg;
  cfg.kind = kind;
  cfg.phases = phases;
  cfg.seed = seed;
  return run_forgetting_benchmark(cfg);
}

nlohmann::ordered_json forgetting_json(const ForgettingReport& r) {
  nlohmann::ordered_json j;
  j["format_version"] = kReportVersion;
  j["model_kind"] = r.model_kind;
  j["variant"] = r.variant;
  j["phases"] = r.phases;
  j["seed"] = r.seed;
  j["frozen"] = r.frozen;
  j["dims"] = r.dims;
  j["parameter_count"] = r.parameter_count;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.retention) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& v : row) cells.push_back(v ? nlohmann::ordered_json(*v) : nullptr);
    rows.push_back(cells);
  }
  j["retention"] = rows;
  j["score"] = r.score;
  return j;
}

std::string forgetting_table(std::span<const ForgettingReport> reports) {
  std::string out;
  for (const ForgettingReport& r : reports) {
    out += r.model_kind + " (" + r.variant + ", " + std::to_string(r.parameter_count) +
           " params" + (r.frozen ? ", frozen" : "") + "): forgetting score " +
           format_fixed(r.score, 4) + "\n";
    for (std::size_t i = 0; i < r.retention.size(); ++i) {
      out += "  after phase " + std::to_string(i) + ":";
      for (const auto& v : r.retention[i]) out += v ? "  " + format_fixed(*v, 3) : "      -";
      out += '\n';
    }
  }
  return out;
}

}  // namespace kcm
