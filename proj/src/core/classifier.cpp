// SPDX-License-Identifier: Apache-2.0

#include "core/classifier.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace llambert {

using nlohmann::json;

namespace {

constexpr int kModelFormatVersion = 1;

void check_dim_bits(int d) {
  if (d < 10 || d > 26) fail(ErrorKind::kUsage, "dim_bits must lie in [10, 26]");
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

std::uint32_t hash_feature(std::string_view token, int dim_bits) {
  const std::uint64_t h = fnv1a64(token);
  const std::uint64_t mask = (std::uint64_t{1} << dim_bits) - 1;
  return static_cast<std::uint32_t>(((h >> dim_bits) ^ h) & mask);
}

FeatureVector featurize(std::string_view text, int dim_bits) {
  check_dim_bits(dim_bits);
  const auto tokens = tokenize(text);
  std::vector<std::uint32_t> idx;
  idx.reserve(tokens.size() * 2);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    idx.push_back(hash_feature(tokens[i], dim_bits));
    if (i + 1 < tokens.size()) idx.push_back(hash_feature(tokens[i] + " " + tokens[i + 1], dim_bits));
  }
  std::sort(idx.begin(), idx.end());
  FeatureVector fv;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && idx[j] == idx[i]) ++j;
    fv.entries.emplace_back(idx[i], static_cast<double>(j - i));
    i = j;
  }
  fv.entries.emplace_back(static_cast<std::uint32_t>(1u << dim_bits), 1.0);
  return fv;
}

LinearModel LinearModel::zeros(const Hyper& h) {
  check_dim_bits(h.dim_bits);
  LinearModel m;
  m.hyper = h;
  m.weights.assign((std::size_t{1} << h.dim_bits) + 1, 0.0);
  return m;
}

double LinearModel::margin(const FeatureVector& x) const {
  double z = 0.0;
  for (const auto& [i, v] : x.entries) z += weights[i] * v;
  return z;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::pair<double, SparseGradient> loss_and_grad(const LinearModel& model,
                                                std::span<const LabeledVector> batch) {
  if (batch.empty()) fail(ErrorKind::kUsage, "loss_and_grad: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<std::pair<std::uint32_t, double>> parts;
  double data_loss = 0.0;
  for (const auto& ex : batch) {
    for (const auto& [i, v] : ex.x.entries) {
      if (i >= model.weights.size()) fail(ErrorKind::kData, "feature index outside model");
    }
    const double z = model.margin(ex.x);
    data_loss += softplus(z) - ex.y * z;
    const double dz = (sigmoid(z) - ex.y) * inv_b;
    for (const auto& [i, v] : ex.x.entries) parts.emplace_back(i, dz * v);
  }
  std::sort(parts.begin(), parts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseGradient g;
  double reg = 0.0;
  for (std::size_t k = 0; k < parts.size();) {
    const std::uint32_t idx = parts[k].first;
    double sum = 0.0;
    for (; k < parts.size() && parts[k].first == idx; ++k) sum += parts[k].second;
    const double w = model.weights[idx];
    reg += w * w;
    g.entries.emplace_back(idx, sum + model.hyper.l2 * w);
  }
  const double loss = data_loss * inv_b + 0.5 * model.hyper.l2 * reg;
  if (!std::isfinite(loss)) fail(ErrorKind::kNumeric, "non-finite loss");
  return {loss, std::move(g)};
}

LinearModel train(const TrainingPlan& plan, const Hyper& hyper, std::uint64_t seed) {
  if (plan.stages.empty()) fail(ErrorKind::kUsage, "train: plan has no stages");
  if (hyper.epochs_per_stage < 1) fail(ErrorKind::kUsage, "epochs_per_stage must be >= 1");
  if (hyper.batch_size < 1) fail(ErrorKind::kUsage, "batch_size must be >= 1");
  if (!(hyper.learning_rate > 0.0)) fail(ErrorKind::kUsage, "learning_rate must be positive");
  if (!(hyper.l2 >= 0.0)) fail(ErrorKind::kUsage, "l2 must be non-negative");
  LinearModel model = LinearModel::zeros(hyper);
  model.seed = seed;
  Rng rng(seed);
  for (const Stage& stage : plan.stages) {
    if (stage.examples.empty()) fail(ErrorKind::kUsage, "train: stage " + stage.name + " is empty");
    std::vector<LabeledVector> data;
    data.reserve(stage.examples.size());
    for (const auto& ex : stage.examples) {
      data.push_back({featurize(ex.text, hyper.dim_bits), ex.label == Label::kPositive ? 1.0 : 0.0});
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LabeledVector> batch;
    std::size_t step = 0;
    for (int epoch = 1; epoch <= hyper.epochs_per_stage; ++epoch) {
      rng.shuffle(order);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
        batch.clear();
        for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
        double loss = 0.0;
        SparseGradient g;
        try {
          std::tie(loss, g) = loss_and_grad(model, batch);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kNumeric) throw;
          fail(ErrorKind::kNumeric, "training diverged in stage " + stage.name + ", epoch " +
                                        std::to_string(epoch));
        }
        loss_sum += loss * static_cast<double>(end - start);
        ++step;
        const double lr = hyper.learning_rate / std::sqrt(static_cast<double>(step));
        for (const auto& [i, gi] : g.entries) model.weights[i] -= lr * gi;
      }
      const double mean = loss_sum / static_cast<double>(order.size());
      if (!std::isfinite(mean)) {
        fail(ErrorKind::kNumeric, "training diverged in stage " + stage.name + ", epoch " +
                                      std::to_string(epoch));
      }
      model.training_log.push_back({stage.name, epoch, mean});
    }
  }
  return model;
}

std::vector<Prediction> predict(const LinearModel& model, std::span<const Example> docs) {
  std::vector<Prediction> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    const double p = sigmoid(model.margin(featurize(d.text, model.hyper.dim_bits)));
    out.push_back({d.id, p >= 0.5 ? Label::kPositive : Label::kNegative, p});
  }
  return out;
}

std::vector<Prediction> predict_corpus(const LinearModel& model, const Corpus& corpus, Split split) {
  std::vector<Example> docs;
  for (const auto& [id, doc] : corpus.documents()) {
    if (doc.split == split) docs.push_back({id, doc.text, Label::kNegative, LabelSource::kModel});
  }
  return predict(model, docs);
}

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "llambert-linear-model";
  j["version"] = kModelFormatVersion;
  j["hash"] = "fnv1a64-xorfold";
  j["hyper"] = {{"dim_bits", model.hyper.dim_bits},
                {"learning_rate", model.hyper.learning_rate},
                {"schedule", "inverse_sqrt_per_stage"},
                {"l2", model.hyper.l2},
                {"epochs_per_stage", model.hyper.epochs_per_stage},
                {"batch_size", model.hyper.batch_size}};
  j["seed"] = model.seed;
  json log = json::array();
  for (const auto& e : model.training_log) {
    log.push_back({{"stage", e.stage}, {"epoch", e.epoch}, {"mean_loss", e.mean_loss}});
  }
  j["training_log"] = log;
  j["weight_count"] = model.weights.size();
  json w = json::array();
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    if (model.weights[i] != 0.0) w.push_back(json::array({i, model.weights[i]}));
  }
  j["weights"] = w;
  write_file(path, j.dump() + "\n");
}

LinearModel load_model(const std::filesystem::path& path) {
  try {
    json j = json::parse(read_file(path));
    if (j.value("format", "") != "llambert-linear-model" ||
        j.value("version", 0) != kModelFormatVersion) {
      fail(ErrorKind::kData, path.string() + ": unsupported model format");
    }
    Hyper h;
    const auto& hj = j.at("hyper");
    h.dim_bits = hj.at("dim_bits").get<int>();
    h.learning_rate = hj.at("learning_rate").get<double>();
    h.l2 = hj.at("l2").get<double>();
    h.epochs_per_stage = hj.at("epochs_per_stage").get<int>();
    h.batch_size = hj.at("batch_size").get<int>();
    LinearModel m = LinearModel::zeros(h);
    m.seed = j.at("seed").get<std::uint64_t>();
    if (j.at("weight_count").get<std::size_t>() != m.weights.size()) {
      fail(ErrorKind::kData, path.string() + ": weight_count does not match dim_bits");
    }
    for (const auto& e : j.at("training_log")) {
      m.training_log.push_back({e.at("stage").get<std::string>(), e.at("epoch").get<int>(),
                                e.at("mean_loss").get<double>()});
    }
    for (const auto& pair : j.at("weights")) {
      const auto idx = pair.at(0).get<std::size_t>();
      if (idx >= m.weights.size()) fail(ErrorKind::kData, path.string() + ": weight index out of range");
      m.weights[idx] = pair.at(1).get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, path.string() + ": " + e.what());
  }
}

void save_predictions(const std::vector<Prediction>& preds, const LabelNames& names,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& p : preds) {
    json j;
    j["doc_id"] = p.doc_id;
    j["label"] = label_name(names, p.label);
    j["score"] = p.score;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path, const LabelNames& names) {
  std::vector<Prediction> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      json j = json::parse(lines[i]);
      out.push_back({j.at("doc_id").get<std::string>(),
                     label_from_name(names, j.at("label").get<std::string>()),
                     j.at("score").get<double>()});
    } catch (const json::exception& e) {
      fail(ErrorKind::kData, path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ": line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace llambert
