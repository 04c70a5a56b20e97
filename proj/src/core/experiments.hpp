// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "core/classifier.hpp"
#include "core/dataset.hpp"
#include "core/evalkit.hpp"

namespace llambert {

enum class SweepKind { kNoise, kSize };

SweepKind sweep_kind_from_name(std::string_view name);

struct SweepConfig {
  SweepKind kind = SweepKind::kNoise;
  std::vector<double> xs;  // noise fractions, or subset sizes
  std::size_t n_seeds = 1;
  std::uint64_t base_seed = 0;
  /// Stage that is noised or subset; defaults to the final (gold) stage.
  std::optional<std::size_t> stage_index;
  Hyper hyper;
  unsigned workers = 0;  // 0 = hardware concurrency
};

/// One independent train/evaluate job per (x, seed); seed i is
/// base_seed + i. Every point is retrained from scratch. Output is
/// independent of the worker count.
std::vector<SweepPoint> run_sweep(const TrainingPlan& plan, const SweepConfig& cfg);

/// Train on the plan and score its eval set.
MetricsReport train_and_evaluate(const TrainingPlan& plan, const Hyper& hyper, std::uint64_t seed);

}  // namespace llambert
