// Copyright 2026 The mlfsc Authors.
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

#include "mlfsc/gradcheck_suite.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <span>
#include <sstream>

#include "mlfsc/autodiff.hpp"
#include "mlfsc/cross_interaction.hpp"
#include "mlfsc/features.hpp"
#include "mlfsc/gradcheck.hpp"
#include "mlfsc/joint_space.hpp"
#include "mlfsc/lcm.hpp"
#include "mlfsc/model.hpp"
#include "mlfsc/random.hpp"

namespace mlfsc {
namespace {

using V = std::span<const ad::Var>;

constexpr double kOpTolerance = 1e-5;
constexpr double kModelTolerance = 1e-4;

struct Case {
  std::string name;
  std::vector<Shape> shapes;
  ad::MultiScalarFn fn;
  double lo = -1.0;
  double hi = 1.0;
  double tolerance = kOpTolerance;
  std::size_t points = 0;  // 0: use the suite default
};

// Fixed pseudo-random weights make every output component contribute to the
// scalar being checked.
ad::Var weighted_sum(ad::Var out) {
  Rng rng(out.size() * 31 + 5);
  ad::Tape& t = out.tape();
  return ad::sum(out * t.constant(uniform_tensor(out.shape(), -1.0, 1.0, rng)));
}

// Square with a backward rule that is off by ten percent.
ad::Var faulty_square(ad::Var x) {
  ad::Tape& t = x.tape();
  std::vector<double> squared = x.value().to_vector();
  for (double& v : squared) v *= v;
  const Tensor saved = x.value();
  return t.record(ad::OpKind::kCustom, Tensor(x.shape(), std::move(squared)), {x},
                  [saved](std::span<const double> g, ad::GradSlots in) {
                    for (std::size_t i = 0; i < g.size(); ++i)
                      in[0][i] += 2.2 * saved[i] * g[i];
                  });
}

std::vector<Case> op_cases() {
  std::vector<Case> c = {
      {"add", {{2, 3}, {2, 3}}, [](ad::Tape&, V v) { return weighted_sum(v[0] + v[1]); }},
      {"add-broadcast-scalar", {{2, 3}, {}}, [](ad::Tape&, V v) { return weighted_sum(v[0] + v[1]); }},
      {"sub", {{4}, {4}}, [](ad::Tape&, V v) { return weighted_sum(v[0] - v[1]); }},
      {"mul", {{2, 3}, {2, 3}}, [](ad::Tape&, V v) { return weighted_sum(v[0] * v[1]); }},
      {"mul-broadcast-scalar", {{}, {5}}, [](ad::Tape&, V v) { return weighted_sum(v[0] * v[1]); }},
      {"scale", {{3}}, [](ad::Tape&, V v) { return weighted_sum(ad::scale(v[0], -2.5)); }},
      {"matmul", {{2, 3}, {3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::matmul(v[0], v[1])); }},
      {"matvec", {{3, 4}, {4}}, [](ad::Tape&, V v) { return weighted_sum(ad::matvec(v[0], v[1])); }},
      {"transpose", {{2, 3}}, [](ad::Tape&, V v) { return weighted_sum(ad::transpose(v[0])); }},
      {"reshape", {{2, 3}}, [](ad::Tape&, V v) { return weighted_sum(ad::reshape(v[0], {3, 2})); }},
      {"sum", {{2, 3}}, [](ad::Tape&, V v) { return ad::sum(v[0] * v[0]); }},
      {"mean", {{2, 3}}, [](ad::Tape&, V v) { return ad::mean(v[0] * v[0]); }},
      {"mean-axis0", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::mean(v[0], 0)); }},
      {"mean-axis1", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::mean(v[0], 1)); }},
      {"concat", {{2, 3}, {2, 2}}, [](ad::Tape&, V v) {
         const ad::Var parts[] = {v[0], v[1]};
         return weighted_sum(ad::concat(parts, 1)); }},
      {"slice", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::slice(v[0], 1, 1, 3)); }},
      {"gather-rows", {{4, 3}}, [](ad::Tape&, V v) {
         const std::size_t rows[] = {2, 0, 2};
         return weighted_sum(ad::gather_rows(v[0], rows)); }},
      {"softmax", {{2, 5}}, [](ad::Tape&, V v) { return weighted_sum(ad::softmax(v[0])); }},
      {"sigmoid", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::sigmoid(v[0])); }},
      {"log", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::log(v[0])); }, 0.2, 2.0},
      {"relu", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::relu(v[0])); }},
      {"gelu", {{6}}, [](ad::Tape&, V v) { return weighted_sum(ad::gelu(v[0])); }, -3.0, 3.0},
      {"layer-norm", {{3, 5}, {5}, {5}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::layer_norm(v[0], v[1], v[2])); }},
      {"cosine", {{5}, {5}}, [](ad::Tape&, V v) { return ad::cosine(v[0], v[1]); }},
      {"normalize-rows", {{3, 4}}, [](ad::Tape&, V v) { return weighted_sum(ad::normalize_rows(v[0])); }},
      {"dropout-train", {{6}}, [](ad::Tape&, V v) {
         Rng rng(3);
         return weighted_sum(ad::dropout(v[0], 0.5, rng, true)); }},
      {"bce-with-logits", {{2, 3}}, [](ad::Tape&, V v) {
         return ad::bce_with_logits(ad::scale(v[0], 4.0),
                                    Tensor::matrix(2, 3, {1, 0, 1, 0, 0, 1})); }},
      {"conv2d", {{2, 5, 6}, {3, 2, 3, 3}, {3}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::conv2d(v[0], v[1], v[2], 2, 1)); }},
      {"project-rows", {{3, 4}, {5, 4}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::project_rows(v[0], v[1])); }},
      {"scaled-cosine-scores", {{3, 4}, {2, 4}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::scaled_cosine_scores(v[0], v[1], 10.0)); }},
      {"pool-locations", {{6, 4}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::pool_locations(v[0])); }},
      {"weighted-pool-locations", {{6, 4}, {2, 3}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::weighted_pool_locations(v[0], v[1])); }},
      {"feature-map-locations", {{4, 2, 3}}, [](ad::Tape&, V v) {
         return weighted_sum(ad::feature_map_locations(v[0])); }},
  };
  return c;
}

// Two labels, 2x2 grids, four channels; shared by the composite rows.
struct Toy {
  std::vector<LocalFeatureMap> maps;
  EpisodeData data;
  ModelConfig config;
  ModelParams params;
};

Toy make_toy(Rng& rng) {
  Toy toy;
  toy.config.channels = 4;
  toy.config.embedding_dim = 3;
  toy.config.joint_dim = 8;
  toy.config.heads = 2;
  toy.config.inner_dim = 4;
  toy.config.top_features = 3;
  toy.params = ModelParams::init(toy.config, rng);
  for (int i = 0; i < 5; ++i)
    toy.maps.emplace_back(uniform_tensor({toy.config.channels, 2, 2}, -1.0, 1.0, rng));
  toy.data.support = {&toy.maps[0], &toy.maps[1]};
  toy.data.query = {&toy.maps[2], &toy.maps[3], &toy.maps[4]};
  toy.data.support_targets = Tensor::matrix(2, 2, {1, 0, 1, 1});
  toy.data.query_targets = Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1});
  toy.data.label_embeddings = uniform_tensor({2, toy.config.embedding_dim}, -1.0, 1.0, rng);
  return toy;
}

std::vector<Case> composite_cases() {
  std::vector<Case> c;
  c.push_back({"cm-loss", {{5, 4}, {5, 3}, {3, 4}, {2, 3}}, [](ad::Tape&, V v) {
                 return cm_loss(JointSpaceVars{v[0], v[1], 10.0}, v[2], v[3],
                                Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1}));
               }});
  c.push_back({"query-loss", {{3, 4}, {2, 4}}, [](ad::Tape&, V v) {
                 return query_loss(v[0], v[1], Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1}), 10.0);
               }});
  c.push_back({"attention-prototype", {{4, 8}, {4, 8}, {8, 8}, {8}, {8, 8}, {8}, {5, 8}, {8}},
               [](ad::Tape&, V v) {
                 AttentionVars a{{v[0], v[1]}, v[2], v[3], v[4], v[5], 0.0};
                 return weighted_sum(attention_prototype(a, v[6], v[7]).prototype);
               }});
  c.push_back({"dynconv-prototype", {{32, 8}, {32, 8}, {4}, {4}, {8}, {8}, {3, 8}, {8}},
               [](ad::Tape&, V v) {
                 DynConvVars d{v[0], v[1], v[2], v[3], v[4], v[5], 3};
                 return weighted_sum(dynconv_prototype(d, v[6], v[7]));
               }});
  c.push_back({"simple-attention-prototype", {{4, 6}, {6}}, [](ad::Tape&, V v) {
                 return weighted_sum(simple_attention_prototype(v[0], v[1], 10.0));
               }});
  c.push_back({"toy-backbone", {{2, 3, 3, 3}, {2}, {3, 2, 3, 3}, {3}, {3, 8, 8}},
               [](ad::Tape&, V v) {
                 ToyBackboneVars b{v[0], v[1], v[2], v[3]};
                 return weighted_sum(toy_backbone_forward(b, v[4]));
               },
               -1.0, 1.0, kOpTolerance, 3});
  return c;
}

GradCheckRow check_case(const Case& c, std::size_t default_points, Rng& rng) {
  GradCheckRow row;
  row.name = c.name;
  row.tolerance = c.tolerance;
  row.points = c.points ? c.points : default_points;
  for (std::size_t p = 0; p < row.points; ++p) {
    std::vector<Tensor> inputs;
    for (const Shape& s : c.shapes) inputs.push_back(uniform_tensor(s, c.lo, c.hi, rng));
    row.max_rel_error = std::max(row.max_rel_error, ad::grad_check(c.fn, inputs).max_rel_error);
  }
  return row;
}

// The importance-weight loss on a trained toy joint space, as seen by LCM.
GradCheckRow check_importance_loss(const Toy& toy, std::size_t points, Rng& rng) {
  GradCheckRow row{"importance-weight-loss", 0.0, kOpTolerance, points};
  const ImportanceObjective objective(toy.params.joint, toy.maps[1], toy.data.label_embeddings,
                                      Tensor::vector({1.0, 1.0}));
  for (std::size_t p = 0; p < points; ++p) {
    const Tensor rho = uniform_tensor({2, 2}, 0.05, 1.0, rng);
    const double err = ad::grad_check(
        [&](ad::Tape& t, ad::Var r) { return objective.loss(t, r); }, rho);
    row.max_rel_error = std::max(row.max_rel_error, err);
  }
  return row;
}

GradCheckRow check_full_model(const Toy& toy, PrototypeMode mode, double gamma) {
  GradCheckRow row{std::string("episode-objective-") + prototype_mode_name(mode), 0.0,
                   kModelTolerance, 1};
  std::vector<Tensor> inputs;
  ModelParams copy = toy.params;
  copy.visit([&](const std::string&, Tensor& x) { inputs.push_back(x); });
  const auto loss = [&](ad::Tape& t, V leaves) {
    ForwardOptions o;
    o.prototypes = mode;
    const EpisodeOutput out = forward_episode(t, vars_from_leaves(toy.params, leaves), toy.data, o);
    return total_loss(out.cm_loss, out.query_loss, gamma);
  };
  row.max_rel_error = ad::grad_check(loss, inputs).max_rel_error;
  return row;
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck_suite(const GradCheckSuiteConfig& config) {
  Rng rng(config.seed);
  std::vector<GradCheckRow> rows;
  for (const Case& c : op_cases()) rows.push_back(check_case(c, config.points, rng));
  for (const Case& c : composite_cases()) rows.push_back(check_case(c, config.points, rng));
  const Toy toy = make_toy(rng);
  rows.push_back(check_importance_loss(toy, config.points, rng));
  rows.push_back(check_full_model(toy, PrototypeMode::kCrossInteraction, 1.0));
  rows.push_back(check_full_model(toy, PrototypeMode::kSimpleAttention, 1.0));
  if (config.inject_fault) {
    const Case fault{"injected-fault", {{4}}, [](ad::Tape&, V v) {
                       return weighted_sum(faulty_square(v[0]));
                     }};
    rows.push_back(check_case(fault, config.points, rng));
  }
  return rows;
}

bool all_passed(const std::vector<GradCheckRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const GradCheckRow& r) { return r.passed(); });
}

std::string format_gradcheck_table(const std::vector<GradCheckRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-38s %12s %10s %7s  %s\n", "check", "max_rel_err",
                "tolerance", "points", "result");
  out << line;
  std::size_t failed = 0;
  for (const GradCheckRow& r : rows) {
    std::snprintf(line, sizeof line, "%-38s %12.3e %10.0e %7zu  %s\n", r.name.c_str(),
                  r.max_rel_error, r.tolerance, r.points, r.passed() ? "pass" : "FAIL");
    out << line;
    failed += !r.passed();
  }
  out << rows.size() - failed << "/" << rows.size() << " checks passed\n";
  return out.str();
}

}  // namespace mlfsc
