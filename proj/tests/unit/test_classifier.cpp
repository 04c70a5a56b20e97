// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>

#include <json.hpp>

#include "core/classifier.hpp"
#include "support/synthetic.hpp"

using namespace llambert;

namespace {

std::uint32_t fold(std::string_view s, int d) {
  const std::uint64_t h = fnv1a64(s);
  return static_cast<std::uint32_t>(((h >> d) ^ h) & ((std::uint64_t{1} << d) - 1));
}

// Dense reference objective: mean BCE plus (l2/2) w_i^2 over touched i.
double reference_loss(const std::vector<double>& w, double l2,
                      const std::vector<LabeledVector>& batch) {
  std::map<std::uint32_t, bool> touched;
  double bce = 0.0;
  for (const auto& ex : batch) {
    double z = 0.0;
    for (const auto& [i, v] : ex.x.entries) {
      z += w[i] * v;
      touched[i] = true;
    }
    const double p = 1.0 / (1.0 + std::exp(-z));
    bce -= ex.y * std::log(p) + (1.0 - ex.y) * std::log(1.0 - p);
  }
  double reg = 0.0;
  for (const auto& [i, t] : touched) reg += w[i] * w[i];
  return bce / static_cast<double>(batch.size()) + 0.5 * l2 * reg;
}

TrainingPlan synthetic_plan(std::size_t n_train, std::size_t n_test) {
  testing::SyntheticSpec ss;
  ss.n_train = n_train;
  ss.n_test = n_test;
  ss.n_extra = 0;
  return build_plan(Strategy::kBaseline, testing::make_synthetic_corpus(ss), nullptr);
}

}  // namespace

TEST_CASE("feature hashing") {
  CHECK(hash_feature("good", 18) == fold("good", 18));
  CHECK(hash_feature("good film", 10) == fold("good film", 10));
  CHECK(hash_feature("", 10) == fold("", 10));
  for (int d : {10, 18, 26}) CHECK(hash_feature("anything", d) < (1u << d));

  const FeatureVector fv = featurize("Good good, FILM!", 12);
  std::map<std::uint32_t, double> want;
  want[fold("good", 12)] += 2;
  want[fold("film", 12)] += 1;
  want[fold("good good", 12)] += 1;
  want[fold("good film", 12)] += 1;
  want[1u << 12] = 1.0;
  CHECK(fv.entries == std::vector<std::pair<std::uint32_t, double>>(want.begin(), want.end()));

  const FeatureVector empty = featurize("  ...  ", 12);
  REQUIRE(empty.entries.size() == 1);
  CHECK(empty.entries[0] == std::pair<std::uint32_t, double>{1u << 12, 1.0});
  CHECK(featurize("a b", 10) == featurize("A, B", 10));
  CHECK_THROWS_AS(featurize("x", 9), Error);
  CHECK_THROWS_AS(featurize("x", 27), Error);
  CHECK_THROWS_AS(LinearModel::zeros(Hyper{.dim_bits = 40}), Error);
}

TEST_CASE("loss matches a dense reference and gradients match finite differences") {
  Hyper h;
  h.dim_bits = 10;
  h.l2 = 0.03;
  LinearModel m = LinearModel::zeros(h);
  Rng rng(11);
  for (auto& w : m.weights) w = rng.uniform() - 0.5;
  const std::vector<LabeledVector> batch{{featurize("alpha beta gamma", 10), 1.0},
                                         {featurize("beta delta", 10), 0.0},
                                         {featurize("epsilon alpha alpha", 10), 1.0}};
  const auto [loss, grad] = loss_and_grad(m, batch);
  CHECK(loss == doctest::Approx(reference_loss(m.weights, h.l2, batch)).epsilon(1e-12));
  CHECK(std::is_sorted(grad.entries.begin(), grad.entries.end()));
  std::map<std::uint32_t, double> g(grad.entries.begin(), grad.entries.end());
  const double eps = 1e-6;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    std::vector<double> up = m.weights, down = m.weights;
    up[i] += eps;
    down[i] -= eps;
    const double fd =
        (reference_loss(up, h.l2, batch) - reference_loss(down, h.l2, batch)) / (2 * eps);
    const double gi = g.count(static_cast<std::uint32_t>(i)) ? g[static_cast<std::uint32_t>(i)] : 0.0;
    CHECK(gi == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("training is deterministic and learns the synthetic task") {
  const TrainingPlan plan = synthetic_plan(600, 300);
  Hyper h;
  h.dim_bits = 14;
  h.epochs_per_stage = 3;
  const LinearModel a = train(plan, h, 5);
  const LinearModel b = train(plan, h, 5);
  CHECK(a.weights == b.weights);
  CHECK(a.training_log == b.training_log);
  CHECK(train(plan, h, 6).weights != a.weights);
  REQUIRE(a.training_log.size() == 3);
  CHECK(a.training_log[0].stage == "gold_train");
  CHECK(a.training_log[2].epoch == 3);
  CHECK(a.training_log[2].mean_loss < a.training_log[0].mean_loss);

  const auto preds = predict(a, plan.eval);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(preds[i].doc_id == plan.eval[i].id);
    CHECK((preds[i].label == Label::kPositive) == (preds[i].score >= 0.5));
    correct += preds[i].label == plan.eval[i].label;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(preds.size()) > 0.8);
}

TEST_CASE("training errors") {
  const TrainingPlan plan = synthetic_plan(50, 10);
  Hyper h;
  h.dim_bits = 10;
  CHECK_THROWS_AS(train(plan, Hyper{.dim_bits = 10, .learning_rate = 0.0}, 1), Error);
  CHECK_THROWS_AS(train(plan, Hyper{.dim_bits = 10, .epochs_per_stage = 0}, 1), Error);
  CHECK_THROWS_AS(train(plan, Hyper{.dim_bits = 10, .batch_size = 0}, 1), Error);
  CHECK_THROWS_AS(train(plan, Hyper{.dim_bits = 10, .l2 = -1.0}, 1), Error);
  TrainingPlan none = plan;
  none.stages.clear();
  CHECK_THROWS_AS(train(none, h, 1), Error);

  // an L2 step with lr * l2 >> 2 multiplies the weights every step
  h.learning_rate = 1e30;
  h.l2 = 1.0;
  try {
    train(plan, h, 1);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    CHECK(std::string(e.what()).find("gold_train") != std::string::npos);
  }
}

TEST_CASE("model and prediction files round trip") {
  const TrainingPlan plan = synthetic_plan(100, 40);
  Hyper h;
  h.dim_bits = 10;
  h.epochs_per_stage = 2;
  const LinearModel m = train(plan, h, 3);
  testing::TempDir tmp("model");
  save_model(m, tmp / "model.json");
  const LinearModel back = load_model(tmp / "model.json");
  CHECK(back.weights == m.weights);
  CHECK(back.seed == 3);
  CHECK(back.hyper.dim_bits == 10);
  CHECK(back.hyper.epochs_per_stage == 2);
  CHECK(back.training_log == m.training_log);
  write_file(tmp / "bad.json", "{\"format\":\"x\"}");
  CHECK_THROWS_AS(load_model(tmp / "bad.json"), Error);

  const auto preds = predict(m, plan.eval);
  save_predictions(preds, kImdbLabels, tmp / "predictions.jsonl");
  const auto lines = read_lines(tmp / "predictions.jsonl");
  REQUIRE(lines.size() == preds.size());
  const auto j = nlohmann::json::parse(lines[0]);
  CHECK(j.at("doc_id") == preds[0].doc_id);
  CHECK(j.at("label") == label_name(kImdbLabels, preds[0].label));
  CHECK(j.at("score").get<double>() == preds[0].score);
  CHECK(load_predictions(tmp / "predictions.jsonl", kImdbLabels) == preds);
  write_file(tmp / "p2.jsonl", "{\"doc_id\":\"a\",\"label\":\"probably\",\"score\":0.4}\n");
  CHECK_THROWS_AS(load_predictions(tmp / "p2.jsonl", kImdbLabels), Error);

  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-1000.0) >= 0.0);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
}
