// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core/dataset.hpp"

namespace llambert {

inline constexpr int kDefaultDimBits = 18;

/// Sparse feature vector: sorted unique indices. The bias feature lives at
/// index 2^d with value 1 and is always present.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
  bool operator==(const FeatureVector&) const = default;
};

/// FNV-1a 64 xor-folded to d bits: ((h >> d) ^ h) & (2^d - 1).
std::uint32_t hash_feature(std::string_view token, int dim_bits);

/// Lowercase ASCII, split on non-alphanumerics, count unigrams and bigrams
/// ("w1 w2") by hashed index, then append the bias.
FeatureVector featurize(std::string_view text, int dim_bits);

struct Hyper {
  int dim_bits = kDefaultDimBits;
  double learning_rate = 0.1;  // step t of a stage uses lr / sqrt(t)
  double l2 = 1e-6;
  int epochs_per_stage = 5;
  int batch_size = 16;
};

struct EpochLog {
  std::string stage;
  int epoch = 0;
  double mean_loss = 0.0;
  bool operator==(const EpochLog&) const = default;
};

struct LinearModel {
  std::vector<double> weights;  // 2^d + 1
  Hyper hyper;
  std::uint64_t seed = 0;
  std::vector<EpochLog> training_log;

  static LinearModel zeros(const Hyper& h);
  std::size_t bias_index() const { return weights.size() - 1; }
  double margin(const FeatureVector& x) const;
};

struct LabeledVector {
  FeatureVector x;
  double y = 0.0;  // 1 for the positive class
};

struct SparseGradient {
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by index
};

/// Mean binary cross-entropy over the batch plus (l2/2)*sum of squared
/// weights over the coordinates the batch touches; gradient over the same
/// coordinates. Throws kNumeric on a non-finite loss.
std::pair<double, SparseGradient> loss_and_grad(const LinearModel& model,
                                                std::span<const LabeledVector> batch);

/// Trains every stage in order on one weight vector; each stage restarts the
/// step-size schedule. Throws kNumeric naming stage/epoch on divergence.
LinearModel train(const TrainingPlan& plan, const Hyper& hyper, std::uint64_t seed);

struct Prediction {
  std::string doc_id;
  Label label = Label::kNegative;
  double score = 0.5;  // P(positive)
  bool operator==(const Prediction&) const = default;
};

double sigmoid(double z);

std::vector<Prediction> predict(const LinearModel& model, std::span<const Example> docs);
std::vector<Prediction> predict_corpus(const LinearModel& model, const Corpus& corpus, Split split);

/// Versioned JSON: hyper, seed, training log, non-zero weights as
/// [index, value] pairs.
void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

/// predictions.jsonl {"doc_id","label","score"}.
void save_predictions(const std::vector<Prediction>& preds, const LabelNames& names,
                      const std::filesystem::path& path);
std::vector<Prediction> load_predictions(const std::filesystem::path& path,
                                         const LabelNames& names);

}  // namespace llambert
