// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <json.hpp>

#include "core/csv.hpp"
#include "core/evalkit.hpp"
#include "core/experiments.hpp"
#include "support/synthetic.hpp"

using namespace llambert;

namespace {

LabelSet gold_of(const std::vector<std::pair<std::string, Label>>& items) {
  LabelSet s("imdb", kImdbLabels);
  for (const auto& [id, l] : items) s.add_record({id, l, LabelSource::kGold, "", "", ""});
  return s;
}

constexpr Label P = Label::kPositive;
constexpr Label N = Label::kNegative;

}  // namespace

TEST_CASE("evaluate builds the gold-by-predicted confusion matrix") {
  LabelSet gold = gold_of({{"a", P}, {"b", P}, {"c", N}, {"d", N}, {"e", N}});
  gold.add_discard("z", "ambiguous");
  const std::vector<Prediction> preds{{"a", P, 0.9}, {"b", N, 0.1}, {"c", N, 0.2},
                                      {"d", P, 0.7}, {"e", N, 0.3}};
  const MetricsReport r = evaluate(preds, gold);
  CHECK(r.n == 5);
  CHECK(r.accuracy == doctest::Approx(0.6));
  CHECK(r.confusion[1][1] == 1);  // gold positive, predicted positive
  CHECK(r.confusion[1][0] == 1);
  CHECK(r.confusion[0][0] == 2);
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.discard_count == 1);

  const auto j = r.to_json(kImdbLabels);
  CHECK(j.at("confusion").at("labels") == nlohmann::json{"negative", "positive"});
  CHECK(j.at("confusion").at("matrix") == nlohmann::json{{2, 1}, {1, 1}});
  const MetricsReport back = MetricsReport::from_json(j);
  CHECK(back.confusion == r.confusion);
  CHECK(back.accuracy == r.accuracy);
  CHECK_THROWS_AS(MetricsReport::from_json(nlohmann::json{{"n", 1}}), Error);

  const std::string table = r.confusion_table(kImdbLabels);
  CHECK(table.find("gold\\pred") == 0);
  CHECK(table.find("negative") != std::string::npos);

  CHECK_THROWS_AS(evaluate({}, gold), Error);
  CHECK_THROWS_AS(evaluate({{"q", P, 0.5}}, gold), Error);
  CHECK_THROWS_AS(evaluate({{"a", P, 0.5}, {"a", P, 0.5}}, gold), Error);
}

TEST_CASE("agreement over the shared ids") {
  const LabelSet a = gold_of({{"a", P}, {"b", P}, {"c", N}, {"d", N}});
  const LabelSet b = gold_of({{"b", N}, {"c", N}, {"d", N}, {"x", P}});
  const Agreement ag = agreement(a, b);
  CHECK(ag.intersection == 3);
  CHECK(ag.disagreements == 1);
  CHECK(ag.disagreement_rate == doctest::Approx(1.0 / 3.0));
  CHECK(agreement(a, a).disagreement_rate == 0.0);
  CHECK_THROWS_AS(agreement(a, gold_of({{"q", P}})), Error);
}

TEST_CASE("seed intervals") {
  // t(0.975, 4) = 2.7764451052; s = sqrt(0.025)
  SeedInterval si = ci_over_seeds({96.5, 96.9, 96.7, 96.8, 96.6});
  CHECK(si.mean == doctest::Approx(96.7));
  CHECK(si.half_width == doctest::Approx(2.7764451052 * std::sqrt(0.025) / std::sqrt(5.0)));
  CHECK(si.n_seeds == 5);
  CHECK(format_interval(si.mean, si.half_width) == "96.70 (±0.20)");
  // t(0.975, 1) = 12.7062047362
  CHECK(ci_over_seeds({1.0, 3.0}).half_width == doctest::Approx(12.7062047362));
  si = ci_over_seeds({0.9, 0.9, 0.9});
  CHECK(si.half_width == 0.0);
  CHECK(si.mean == 0.9);
  CHECK_THROWS_AS(ci_over_seeds({1.0}), Error);
  CHECK_THROWS_AS(ci_over_seeds({1.0, std::nan("")}), Error);
  CHECK(format_interval(96.72, 0.17) == "96.72 (±0.17)");
  CHECK(format_interval(3.0, 1.9632, 3) == "3.000 (±1.963)");
}

TEST_CASE("error sampling and export") {
  const LabelSet gold = gold_of({{"a", P}, {"b", P}, {"c", N}, {"d", N}, {"e", N}});
  const std::vector<Prediction> preds{{"a", N, 0.1}, {"b", N, 0.1}, {"c", N, 0.2},
                                      {"d", P, 0.7}, {"e", N, 0.3}};
  ErrorSample s = sample_errors(preds, gold, 2, 1);
  CHECK(s.disagreements == 3);
  CHECK(s.ids.size() == 2);
  CHECK(s.shortfall == 0);
  CHECK(std::is_sorted(s.ids.begin(), s.ids.end()));
  for (const auto& id : s.ids) CHECK((id == "a" || id == "b" || id == "d"));
  CHECK(sample_errors(preds, gold, 2, 1).ids == s.ids);
  s = sample_errors(preds, gold, 100, 1);
  CHECK(s.ids == std::vector<std::string>{"a", "b", "d"});
  CHECK(s.shortfall == 97);

  testing::TempDir tmp("errors");
  export_errors_csv({"a", "d"}, [](const std::string& id) { return id == "a" ? "says \"hi\", ok" : "x"; },
                    tmp / "errors_export.csv");
  const auto rows = csv::parse(read_file(tmp / "errors_export.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"doc_id", "text"});
  CHECK(rows[1] == std::vector<std::string>{"a", "says \"hi\", ok"});
}

TEST_CASE("human annotations and the cross tabulation") {
  testing::TempDir tmp("human");
  write_file(tmp / "h.csv",
             "doc_id,sentiment,note\n a ,Positive,x\nb,negative,\nc,mixed,\nd,neutral,\n");
  const auto ann = load_human_annotations(tmp / "h.csv", kImdbLabels);
  REQUIRE(ann.size() == 4);
  CHECK(ann[0].doc_id == "a");
  CHECK(ann[0].sentiment == Sentiment::kPositive);
  CHECK(ann[3].sentiment == Sentiment::kMixed);
  const std::vector<Prediction> preds{{"a", P, 0.9}, {"b", P, 0.8}, {"c", N, 0.2}, {"d", P, 0.6}};
  const CrossTab t = crosstab_human(ann, preds);
  CHECK(t.counts[0] == std::array<std::size_t, 3>{1, 1, 1});  // model positive
  CHECK(t.counts[1] == std::array<std::size_t, 3>{0, 0, 1});  // model negative
  CHECK(t.total() == 4);
  const auto rows = csv::parse(t.to_csv(kImdbLabels));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "model");
  CHECK(rows[1] == std::vector<std::string>{"positive", "1", "1", "1"});
  CHECK(rows[2] == std::vector<std::string>{"negative", "0", "0", "1"});
  CHECK(t.render(kImdbLabels).find("model\\human") == 0);

  CHECK_THROWS_AS(crosstab_human({{"zz", Sentiment::kMixed}}, preds), Error);
  write_file(tmp / "bad.csv", "doc_id,sentiment\na,delighted\n");
  CHECK_THROWS_AS(load_human_annotations(tmp / "bad.csv", kImdbLabels), Error);
  write_file(tmp / "nocol.csv", "id,sentiment\na,positive\n");
  CHECK_THROWS_AS(load_human_annotations(tmp / "nocol.csv", kImdbLabels), Error);
  write_file(tmp / "dup.csv", "doc_id,sentiment\na,positive\na,negative\n");
  CHECK_THROWS_AS(load_human_annotations(tmp / "dup.csv", kImdbLabels), Error);
}

TEST_CASE("sweep report sorts by x and averages seeds") {
  auto rep = [](double acc) {
    MetricsReport r;
    r.n = 100;
    r.accuracy = acc;
    return r;
  };
  const SweepReport s = sweep_report({{0.4, {rep(0.8), rep(0.9)}}, {0.0, {rep(0.95), rep(0.97)}}});
  CHECK(s.csv == "x,accuracy,n\n0,0.960000,100\n0.4,0.850000,100\n");
  CHECK(s.summary.at("points")[0].at("per_seed") == nlohmann::json{0.95, 0.97});
  CHECK(s.summary.at("points")[1].at("ci95_half_width").get<double>() ==
        doctest::Approx(12.7062047362 * std::sqrt(0.005) / std::sqrt(2.0)));
  CHECK_THROWS_AS(sweep_report({{0.1, {rep(1)}}, {0.1, {rep(1)}}}), Error);
  CHECK_THROWS_AS(sweep_report({{0.1, {}}}), Error);
}

TEST_CASE("run_sweep is independent of the worker count") {
  testing::SyntheticSpec ss;
  ss.n_train = 200;
  ss.n_test = 100;
  ss.n_extra = 0;
  const TrainingPlan plan =
      build_plan(Strategy::kBaseline, testing::make_synthetic_corpus(ss), nullptr);
  SweepConfig cfg;
  cfg.kind = SweepKind::kNoise;
  cfg.xs = {0.0, 0.5};
  cfg.n_seeds = 2;
  cfg.base_seed = 3;
  cfg.hyper.dim_bits = 12;
  cfg.hyper.epochs_per_stage = 2;
  cfg.workers = 1;
  const auto one = run_sweep(plan, cfg);
  cfg.workers = 3;
  const auto three = run_sweep(plan, cfg);
  CHECK(sweep_report(one).csv == sweep_report(three).csv);
  REQUIRE(one.size() == 2);
  CHECK(one[0].reports.size() == 2);
  CHECK(one[0].reports[0].accuracy ==
        train_and_evaluate(plan, cfg.hyper, 3).accuracy);  // zero noise is the plain run

  SweepConfig size = cfg;
  size.kind = SweepKind::kSize;
  size.xs = {50, 200};
  const auto sz = run_sweep(plan, size);
  CHECK(sz.size() == 2);
  size.xs = {201};
  CHECK_THROWS_AS(run_sweep(plan, size), Error);
  CHECK_THROWS_AS(sweep_kind_from_name("depth"), Error);
}
