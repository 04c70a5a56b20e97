// SPDX-License-Identifier: Apache-2.0

#include "core/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace llambert {

SweepKind sweep_kind_from_name(std::string_view name) {
  if (name == "noise") return SweepKind::kNoise;
  if (name == "size") return SweepKind::kSize;
  fail(ErrorKind::kUsage, "unknown sweep kind '" + std::string(name) + "' (noise, size)");
}

MetricsReport train_and_evaluate(const TrainingPlan& plan, const Hyper& hyper, std::uint64_t seed) {
  const LinearModel model = train(plan, hyper, seed);
  const auto preds = predict(model, plan.eval);
  return evaluate(preds, labelset_from_examples(plan.eval, plan.task_id, plan.label_names));
}

std::vector<SweepPoint> run_sweep(const TrainingPlan& plan, const SweepConfig& cfg) {
  plan.check_invariants();
  if (cfg.xs.empty()) fail(ErrorKind::kUsage, "sweep needs at least one x value");
  if (cfg.n_seeds < 1) fail(ErrorKind::kUsage, "sweep needs at least one seed");
  const std::size_t stage = cfg.stage_index.value_or(plan.stages.size() - 1);
  if (stage >= plan.stages.size()) fail(ErrorKind::kUsage, "sweep stage index out of range");

  std::vector<std::size_t> sizes;
  if (cfg.kind == SweepKind::kSize) {
    for (double x : cfg.xs) {
      if (!(x >= 1.0) || std::floor(x) != x) fail(ErrorKind::kUsage, "sweep sizes must be positive integers");
      sizes.push_back(static_cast<std::size_t>(x));
    }
    // Validates ordering and bounds before any work starts.
    (void)size_sweep(plan.stages[stage], sizes, cfg.base_seed);
  } else {
    for (double x : cfg.xs) (void)noise_flip_count(plan.stages[stage].examples.size(), x);
  }

  const std::size_t n_x = cfg.xs.size();
  std::vector<SweepPoint> points(n_x);
  for (std::size_t i = 0; i < n_x; ++i) {
    points[i].x = cfg.xs[i];
    points[i].reports.resize(cfg.n_seeds);
  }

  // Size sweeps share one nested family per seed; noise levels are
  // independent draws per (x, seed).
  auto run_job = [&](std::size_t job) {
    const std::size_t xi = job % n_x, si = job / n_x;
    const std::uint64_t seed = cfg.base_seed + si;
    TrainingPlan p = plan;
    if (cfg.kind == SweepKind::kNoise) {
      p.stages[stage] = inject_noise(plan.stages[stage], cfg.xs[xi], derive_seed(seed, "noise"));
    } else {
      auto family = size_sweep(plan.stages[stage], sizes, derive_seed(seed, "size"));
      p.stages[stage] = std::move(family[xi].second);
    }
    points[xi].reports[si] = train_and_evaluate(p, cfg.hyper, seed);
  };

  const std::size_t jobs = n_x * cfg.n_seeds;
  unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto loop = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      try {
        run_job(j);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next.store(jobs);
      }
    }
  };
  if (workers <= 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
  }
  if (error) std::rethrow_exception(error);
  return points;
}

}  // namespace llambert
