// SPDX-License-Identifier: Apache-2.0

#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace llambert {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kPlanFormatVersion = 1;

struct Coverage {
  std::size_t llm_train = 0, llm_extra = 0, gold_train = 0;
};

std::vector<Example> collect_llm(const Corpus& corpus, const LabelSet& labels, Split split) {
  std::vector<Example> out;
  for (const auto& [id, rec] : labels.records()) {
    const Document& doc = corpus.at(id);
    if (doc.split != split) continue;
    out.push_back({id, doc.text, rec.label, rec.source});
  }
  return out;
}

std::vector<Example> collect_gold(const Corpus& corpus, Split split) {
  std::vector<Example> out;
  for (const auto& [id, doc] : corpus.documents()) {
    if (doc.split != split || !doc.gold_label) continue;
    out.push_back({id, doc.text, *doc.gold_label, LabelSource::kGold});
  }
  return out;
}

std::string coverage_message(Strategy s, const Coverage& c) {
  std::ostringstream m;
  m << "strategy " << strategy_name(s) << " lacks label coverage: llm labels on train="
    << c.llm_train << ", llm labels on extra=" << c.llm_extra
    << ", gold labels on train=" << c.gold_train;
  return m.str();
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kBaseline: return "baseline";
    case Strategy::kLlambertTrain: return "llambert_train";
    case Strategy::kLlambertTrainExtra: return "llambert_train_extra";
    case Strategy::kCombinedExtraThenTrain: return "combined";
  }
  return "baseline";
}

Strategy strategy_from_name(std::string_view name) {
  if (name == "baseline") return Strategy::kBaseline;
  if (name == "llambert_train" || name == "llambert") return Strategy::kLlambertTrain;
  if (name == "llambert_train_extra") return Strategy::kLlambertTrainExtra;
  if (name == "combined" || name == "combined_extra_then_train") {
    return Strategy::kCombinedExtraThenTrain;
  }
  fail(ErrorKind::kUsage, "unknown strategy '" + std::string(name) +
                              "' (baseline, llambert_train, llambert_train_extra, combined)");
}

void TrainingPlan::check_invariants() const {
  if (stages.empty()) fail(ErrorKind::kData, "training plan has no stages");
  std::set<std::string> eval_ids;
  for (const auto& e : eval) eval_ids.insert(e.id);
  for (const auto& st : stages) {
    if (st.examples.empty()) fail(ErrorKind::kData, "stage " + st.name + " is empty");
    std::set<std::string> seen;
    for (const auto& ex : st.examples) {
      if (!seen.insert(ex.id).second) {
        fail(ErrorKind::kData, "stage " + st.name + " repeats id " + ex.id);
      }
      if (eval_ids.count(ex.id)) {
        fail(ErrorKind::kData, "stage " + st.name + " leaks evaluation id " + ex.id);
      }
    }
  }
}

TrainingPlan build_plan(Strategy strategy, const Corpus& corpus, const LabelSet* llm_labels,
                        Split eval_split) {
  if (eval_split == Split::kTrain || eval_split == Split::kExtra) {
    fail(ErrorKind::kUsage, "evaluation split must not be a training split");
  }
  TrainingPlan plan;
  plan.task_id = corpus.task_id();
  plan.label_names = corpus.label_names();
  plan.strategy = strategy;
  plan.eval_split = eval_split;
  plan.eval = collect_gold(corpus, eval_split);

  Coverage cov;
  std::vector<Example> llm_train, llm_extra;
  if (llm_labels) {
    if (llm_labels->label_names() != corpus.label_names()) {
      fail(ErrorKind::kData, "llm label names do not match the corpus");
    }
    llm_train = collect_llm(corpus, *llm_labels, Split::kTrain);
    llm_extra = collect_llm(corpus, *llm_labels, Split::kExtra);
  }
  std::vector<Example> gold_train = collect_gold(corpus, Split::kTrain);
  cov = {llm_train.size(), llm_extra.size(), gold_train.size()};

  auto require = [&](bool ok) {
    if (!ok) fail(ErrorKind::kData, coverage_message(strategy, cov));
  };
  switch (strategy) {
    case Strategy::kBaseline:
      require(!gold_train.empty());
      plan.stages.push_back({"gold_train", std::move(gold_train)});
      break;
    case Strategy::kLlambertTrain:
      require(!llm_train.empty());
      plan.stages.push_back({"llm_train", std::move(llm_train)});
      break;
    case Strategy::kLlambertTrainExtra: {
      require(!llm_train.empty() || !llm_extra.empty());
      std::vector<Example> merged = std::move(llm_train);
      merged.insert(merged.end(), llm_extra.begin(), llm_extra.end());
      std::sort(merged.begin(), merged.end(),
                [](const Example& a, const Example& b) { return a.id < b.id; });
      plan.stages.push_back({"llm_train_extra", std::move(merged)});
      break;
    }
    case Strategy::kCombinedExtraThenTrain:
      require(!llm_extra.empty() && !gold_train.empty());
      plan.stages.push_back({"llm_extra", std::move(llm_extra)});
      plan.stages.push_back({"gold_train", std::move(gold_train)});
      break;
  }
  plan.check_invariants();
  return plan;
}

std::size_t noise_flip_count(std::size_t n, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    fail(ErrorKind::kUsage, "noise fraction must lie in [0, 1]");
  }
  // std::round rounds halfway cases away from zero.
  const double m = std::round(fraction * static_cast<double>(n));
  return std::min(n, static_cast<std::size_t>(m));
}

Stage inject_noise(const Stage& stage, double fraction, std::uint64_t seed) {
  const std::size_t n = stage.examples.size();
  const std::size_t m = noise_flip_count(n, fraction);
  Stage out = stage;
  Rng rng(seed);
  for (std::size_t idx : sample_indices(n, m, rng)) {
    Example& ex = out.examples[idx];
    ex.label = opposite(ex.label);
    ex.source = LabelSource::kNoise;
  }
  return out;
}

std::vector<std::pair<std::size_t, Stage>> size_sweep(const Stage& stage,
                                                      const std::vector<std::size_t>& sizes,
                                                      std::uint64_t seed) {
  const std::size_t n = stage.examples.size();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] > n) {
      fail(ErrorKind::kData, "sweep size " + std::to_string(sizes[i]) + " exceeds stage size " +
                                 std::to_string(n));
    }
    if (i > 0 && sizes[i] <= sizes[i - 1]) {
      fail(ErrorKind::kUsage, "sweep sizes must be strictly increasing");
    }
  }
  std::vector<std::pair<std::size_t, Stage>> out;
  if (sizes.empty()) return out;
  Rng rng(seed);
  const std::vector<std::size_t> order = sample_indices(n, sizes.back(), rng);
  for (std::size_t s : sizes) {
    std::vector<std::size_t> idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s));
    std::sort(idx.begin(), idx.end());
    Stage sub{stage.name, {}};
    sub.examples.reserve(s);
    for (std::size_t i : idx) sub.examples.push_back(stage.examples[i]);
    out.emplace_back(s, std::move(sub));
  }
  return out;
}

std::vector<std::size_t> default_size_grid(std::size_t n) {
  std::vector<std::size_t> grid;
  for (std::size_t s : {500, 1000, 2500, 5000, 10000, 25000}) {
    if (s <= n) grid.push_back(s);
  }
  if (grid.empty() || grid.back() != n) grid.push_back(n);
  return grid;
}

void write_stage_file(const std::vector<Example>& examples, const LabelNames& names,
                      const fs::path& path) {
  std::ostringstream out;
  for (const auto& ex : examples) {
    json j;
    j["id"] = ex.id;
    j["text"] = ex.text;
    j["label"] = label_name(names, ex.label);
    out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  write_file(path, out.str());
}

std::vector<Example> read_stage_file(const fs::path& path, const LabelNames& names,
                                     LabelSource source) {
  std::vector<Example> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      json j = json::parse(lines[i]);
      out.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>(),
                     label_from_name(names, j.at("label").get<std::string>()), source});
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void export_plan(const TrainingPlan& plan, const fs::path& dir) {
  plan.check_invariants();
  fs::create_directories(dir);
  json meta;
  meta["format"] = "llambert-plan";
  meta["version"] = kPlanFormatVersion;
  meta["task_id"] = plan.task_id;
  meta["label_names"] = {plan.label_names[0], plan.label_names[1]};
  meta["strategy"] = std::string(strategy_name(plan.strategy));
  meta["eval_split"] = std::string(split_name(plan.eval_split));
  json stages = json::array();
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const std::string file = "train_stage" + std::to_string(i + 1) + ".jsonl";
    write_stage_file(plan.stages[i].examples, plan.label_names, dir / file);
    std::size_t noised = static_cast<std::size_t>(
        std::count_if(plan.stages[i].examples.begin(), plan.stages[i].examples.end(),
                      [](const Example& e) { return e.source == LabelSource::kNoise; }));
    stages.push_back({{"name", plan.stages[i].name},
                      {"file", file},
                      {"size", plan.stages[i].examples.size()},
                      {"noised", noised}});
  }
  meta["stages"] = stages;
  write_stage_file(plan.eval, plan.label_names, dir / "eval.jsonl");
  meta["eval_file"] = "eval.jsonl";
  meta["eval_size"] = plan.eval.size();
  write_file(dir / "plan.json", meta.dump(2) + "\n");
}

TrainingPlan load_plan(const fs::path& dir) {
  json meta;
  try {
    meta = json::parse(read_file(dir / "plan.json"));
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, (dir / "plan.json").string() + ": " + e.what());
  }
  if (meta.value("format", "") != "llambert-plan" || meta.value("version", 0) != kPlanFormatVersion) {
    fail(ErrorKind::kData, (dir / "plan.json").string() + ": unsupported plan format");
  }
  TrainingPlan plan;
  try {
    plan.task_id = meta.at("task_id").get<std::string>();
    plan.label_names = {meta.at("label_names").at(0).get<std::string>(),
                        meta.at("label_names").at(1).get<std::string>()};
    plan.strategy = strategy_from_name(meta.at("strategy").get<std::string>());
    plan.eval_split = split_from_name(meta.at("eval_split").get<std::string>());
    for (const auto& st : meta.at("stages")) {
      const std::string name = st.at("name").get<std::string>();
      const LabelSource src = name.rfind("gold", 0) == 0 ? LabelSource::kGold : LabelSource::kLlm;
      plan.stages.push_back(
          {name, read_stage_file(dir / st.at("file").get<std::string>(), plan.label_names, src)});
    }
    plan.eval = read_stage_file(dir / meta.value("eval_file", "eval.jsonl"), plan.label_names,
                                LabelSource::kGold);
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, (dir / "plan.json").string() + ": " + e.what());
  }
  plan.check_invariants();
  return plan;
}

}  // namespace llambert
