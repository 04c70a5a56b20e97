// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/classifier.hpp"
#include "core/labels.hpp"

namespace llambert {

/// confusion[gold][predicted], indexed by label index (0 negative, 1 positive).
struct MetricsReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::size_t discard_count = 0;
  std::string manifest;

  nlohmann::json to_json(const LabelNames& names) const;
  static MetricsReport from_json(const nlohmann::json& j);
  /// Header-labelled matrix, rows gold and columns predicted.
  std::string confusion_table(const LabelNames& names) const;
};

MetricsReport evaluate(const std::vector<Prediction>& predictions, const LabelSet& gold);

LabelSet labelset_from_examples(const std::vector<Example>& examples, const std::string& task_id,
                                const LabelNames& names);

struct Agreement {
  double disagreement_rate = 0.0;
  std::size_t intersection = 0;
  std::size_t disagreements = 0;
};

/// Over the id intersection; throws kData when it is empty.
Agreement agreement(const LabelSet& a, const LabelSet& b);

struct SeedInterval {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t n_seeds = 0;
  std::vector<double> values;
};

/// Two-sided 95% Student-t interval: mean ± t(0.975, n-1) * s / sqrt(n).
SeedInterval ci_over_seeds(const std::vector<double>& values);

/// "96.72 (±0.17)"
std::string format_interval(double mean, double half_width, int decimals = 2);

struct ErrorSample {
  std::vector<std::string> ids;  // ascending
  std::size_t disagreements = 0;
  std::size_t shortfall = 0;  // requested minus returned
};

/// min(n, #disagreements) ids drawn without replacement from the
/// predictions that differ from gold.
ErrorSample sample_errors(const std::vector<Prediction>& predictions, const LabelSet& gold,
                          std::size_t n, std::uint64_t seed);

/// errors_export.csv: header doc_id,text; labels deliberately omitted.
void export_errors_csv(const std::vector<std::string>& ids,
                       const std::function<std::string(const std::string&)>& text_of,
                       const std::filesystem::path& path);

enum class Sentiment { kPositive, kNegative, kMixed };

struct HumanAnnotation {
  std::string doc_id;
  Sentiment sentiment = Sentiment::kMixed;
};

/// human_annotations.csv with a header containing doc_id and sentiment
/// columns. Sentiment accepts positive/negative/mixed (or neutral), and the
/// task's own label names.
std::vector<HumanAnnotation> load_human_annotations(const std::filesystem::path& path,
                                                    const LabelNames& names);

/// counts[model row][human col]; rows {positive, negative}, columns
/// {positive, negative, mixed}.
struct CrossTab {
  std::array<std::array<std::size_t, 3>, 2> counts{};
  std::size_t total() const;
  std::string render(const LabelNames& names) const;
  std::string to_csv(const LabelNames& names) const;
};

CrossTab crosstab_human(const std::vector<HumanAnnotation>& annotations,
                        const std::vector<Prediction>& predictions);

struct SweepPoint {
  double x = 0.0;
  std::vector<MetricsReport> reports;  // one per seed
};

struct SweepReport {
  std::string csv;  // x,accuracy,n sorted by x; accuracy is the seed mean
  nlohmann::json summary;
};

SweepReport sweep_report(std::vector<SweepPoint> points);

}  // namespace llambert
