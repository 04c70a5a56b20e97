// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "core/corpus.hpp"
#include "core/labels.hpp"

namespace llambert {

enum class Strategy { kBaseline, kLlambertTrain, kLlambertTrainExtra, kCombinedExtraThenTrain };

std::string_view strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);

struct Example {
  std::string id;
  std::string text;
  Label label = Label::kNegative;
  LabelSource source = LabelSource::kGold;

  bool operator==(const Example&) const = default;
};

struct Stage {
  std::string name;
  std::vector<Example> examples;  // ascending id, ids unique

  bool operator==(const Stage&) const = default;
};

/// Ordered curriculum plus the gold-labeled evaluation set. No eval-split id
/// ever appears in a training stage.
struct TrainingPlan {
  std::string task_id;
  LabelNames label_names;
  Strategy strategy = Strategy::kBaseline;
  Split eval_split = Split::kTest;
  std::vector<Stage> stages;
  std::vector<Example> eval;

  /// Throws when a stage is empty, holds duplicate ids, or leaks eval ids.
  void check_invariants() const;

  bool operator==(const TrainingPlan&) const = default;
};

/// baseline → [gold(train)]; llambert_train → [llm(train)];
/// llambert_train_extra → [llm(train) ∪ llm(extra)];
/// combined → [llm(extra), gold(train)]. Discarded ids carry no record and
/// so drop out; labels on eval-split ids are ignored.
TrainingPlan build_plan(Strategy strategy, const Corpus& corpus, const LabelSet* llm_labels,
                        Split eval_split = Split::kTest);

/// Flips exactly round(fraction * n) labels (half away from zero), chosen
/// without replacement; flipped examples get source "noise".
Stage inject_noise(const Stage& stage, double fraction, std::uint64_t seed);

std::size_t noise_flip_count(std::size_t n, double fraction);

/// Nested seeded subsets: one permutation, each size takes its prefix.
/// Sizes must be strictly increasing and <= n.
std::vector<std::pair<std::size_t, Stage>> size_sweep(const Stage& stage,
                                                      const std::vector<std::size_t>& sizes,
                                                      std::uint64_t seed);

/// 500, 1000, 2500, 5000, 10000, 25000 capped at n, with n appended if absent.
std::vector<std::size_t> default_size_grid(std::size_t n);

/// Stage files train_stage1.jsonl, train_stage2.jsonl, ... and eval.jsonl,
/// each line {"id","text","label"}, plus plan.json describing them.
void export_plan(const TrainingPlan& plan, const std::filesystem::path& dir);
TrainingPlan load_plan(const std::filesystem::path& dir);

void write_stage_file(const std::vector<Example>& examples, const LabelNames& names,
                      const std::filesystem::path& path);
std::vector<Example> read_stage_file(const std::filesystem::path& path, const LabelNames& names,
                                     LabelSource source);

}  // namespace llambert
