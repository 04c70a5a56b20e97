// SPDX-License-Identifier: Apache-2.0

#include "core/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "core/csv.hpp"

namespace llambert {

using nlohmann::json;

namespace {

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

json MetricsReport::to_json(const LabelNames& names) const {
  json j;
  j["n"] = n;
  j["accuracy"] = accuracy;
  j["confusion"] = {{"rows", "gold"},
                    {"cols", "predicted"},
                    {"labels", {names[0], names[1]}},
                    {"matrix", {{confusion[0][0], confusion[0][1]}, {confusion[1][0], confusion[1][1]}}}};
  j["discard_count"] = discard_count;
  j["manifest"] = manifest;
  return j;
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  try {
    r.n = j.at("n").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    const auto& m = j.at("confusion").at("matrix");
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t p = 0; p < 2; ++p) r.confusion[g][p] = m.at(g).at(p).get<std::size_t>();
    }
    r.discard_count = j.value("discard_count", std::size_t{0});
    r.manifest = j.value("manifest", "");
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

std::string MetricsReport::confusion_table(const LabelNames& names) const {
  const std::size_t w = std::max<std::size_t>({14, names[0].size() + 6, names[1].size() + 6});
  std::ostringstream s;
  s << pad("gold\\pred", w) << pad(names[0], w) << names[1] << '\n';
  for (std::size_t g = 0; g < 2; ++g) {
    s << pad(names[g], w) << pad(std::to_string(confusion[g][0]), w) << confusion[g][1] << '\n';
  }
  return s.str();
}

MetricsReport evaluate(const std::vector<Prediction>& predictions, const LabelSet& gold) {
  MetricsReport r;
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    if (!seen.insert(p.doc_id).second) fail(ErrorKind::kData, "duplicate prediction for " + p.doc_id);
    const auto g = gold.label_of(p.doc_id);
    if (!g) fail(ErrorKind::kData, "no gold label for predicted document " + p.doc_id);
    ++r.confusion[index_of(*g)][index_of(p.label)];
  }
  r.n = predictions.size();
  if (r.n == 0) fail(ErrorKind::kData, "evaluate: no predictions");
  r.accuracy = static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) / static_cast<double>(r.n);
  r.discard_count = gold.discards().size();
  return r;
}

LabelSet labelset_from_examples(const std::vector<Example>& examples, const std::string& task_id,
                                const LabelNames& names) {
  LabelSet set(task_id, names);
  for (const auto& e : examples) set.add_record({e.id, e.label, e.source, "", "", ""});
  return set;
}

Agreement agreement(const LabelSet& a, const LabelSet& b) {
  Agreement out;
  for (const auto& [id, rec] : a.records()) {
    const auto other = b.label_of(id);
    if (!other) continue;
    ++out.intersection;
    if (*other != rec.label) ++out.disagreements;
  }
  if (out.intersection == 0) fail(ErrorKind::kData, "agreement: label sets share no document ids");
  out.disagreement_rate = static_cast<double>(out.disagreements) / static_cast<double>(out.intersection);
  return out;
}

SeedInterval ci_over_seeds(const std::vector<double>& values) {
  if (values.size() < 2) fail(ErrorKind::kUsage, "ci_over_seeds needs at least 2 values");
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::kData, "ci_over_seeds: non-finite value");
  }
  SeedInterval si;
  si.values = values;
  si.n_seeds = values.size();
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  si.mean = sum / n;
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    si.mean = values.front();
    si.half_width = 0.0;
    return si;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - si.mean) * (v - si.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.975);
  si.half_width = t * sd / std::sqrt(n);
  return si;
}

std::string format_interval(double mean, double half_width, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f (±%.*f)", decimals, mean, decimals, half_width);
  return buf;
}

ErrorSample sample_errors(const std::vector<Prediction>& predictions, const LabelSet& gold,
                          std::size_t n, std::uint64_t seed) {
  std::vector<std::string> wrong;
  for (const auto& p : predictions) {
    const auto g = gold.label_of(p.doc_id);
    if (g && *g != p.label) wrong.push_back(p.doc_id);
  }
  std::sort(wrong.begin(), wrong.end());
  wrong.erase(std::unique(wrong.begin(), wrong.end()), wrong.end());
  ErrorSample out;
  out.disagreements = wrong.size();
  const std::size_t k = std::min(n, wrong.size());
  out.shortfall = n - k;
  Rng rng(seed);
  for (std::size_t i : sample_indices(wrong.size(), k, rng)) out.ids.push_back(wrong[i]);
  std::sort(out.ids.begin(), out.ids.end());
  return out;
}

void export_errors_csv(const std::vector<std::string>& ids,
                       const std::function<std::string(const std::string&)>& text_of,
                       const std::filesystem::path& path) {
  std::string out = csv::format_row({"doc_id", "text"});
  for (const auto& id : ids) out += csv::format_row({id, text_of(id)});
  write_file(path, out);
}

std::vector<HumanAnnotation> load_human_annotations(const std::filesystem::path& path,
                                                    const LabelNames& names) {
  const auto rows = csv::parse(read_file(path));
  if (rows.empty()) return {};
  const auto& header = rows.front();
  auto col = [&](const char* name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    fail(ErrorKind::kData, path.string() + ": missing column " + name);
  };
  const std::size_t id_col = col("doc_id"), s_col = col("sentiment");
  std::vector<HumanAnnotation> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path.string() + ": row " + std::to_string(r + 1) + ": ";
    if (row.size() <= std::max(id_col, s_col)) fail(ErrorKind::kData, where + "too few columns");
    HumanAnnotation a;
    a.doc_id = trim(row[id_col]);
    const std::string s = ascii_lower(trim(row[s_col]));
    if (s == "positive" || s == ascii_lower(names[1])) {
      a.sentiment = Sentiment::kPositive;
    } else if (s == "negative" || s == ascii_lower(names[0])) {
      a.sentiment = Sentiment::kNegative;
    } else if (s == "mixed" || s == "neutral" || s == "mixed/neutral") {
      a.sentiment = Sentiment::kMixed;
    } else {
      fail(ErrorKind::kData, where + "unknown sentiment '" + row[s_col] + "'");
    }
    if (!seen.insert(a.doc_id).second) fail(ErrorKind::kData, where + "duplicate doc_id " + a.doc_id);
    out.push_back(std::move(a));
  }
  return out;
}

std::size_t CrossTab::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) t += c;
  }
  return t;
}

std::string CrossTab::render(const LabelNames& names) const {
  const std::size_t w = std::max<std::size_t>({12, names[0].size() + 4, names[1].size() + 4});
  std::ostringstream s;
  s << pad("model\\human", w) << pad("positive", w) << pad("negative", w) << "mixed\n";
  const char* row_label[2] = {names[1].c_str(), names[0].c_str()};
  for (std::size_t r = 0; r < 2; ++r) {
    s << pad(row_label[r], w) << pad(std::to_string(counts[r][0]), w)
      << pad(std::to_string(counts[r][1]), w) << counts[r][2] << '\n';
  }
  return s.str();
}

std::string CrossTab::to_csv(const LabelNames& names) const {
  std::string out = csv::format_row({"model", "human_positive", "human_negative", "human_mixed"});
  const std::string row_label[2] = {names[1], names[0]};
  for (std::size_t r = 0; r < 2; ++r) {
    out += csv::format_row({row_label[r], std::to_string(counts[r][0]), std::to_string(counts[r][1]),
                            std::to_string(counts[r][2])});
  }
  return out;
}

CrossTab crosstab_human(const std::vector<HumanAnnotation>& annotations,
                        const std::vector<Prediction>& predictions) {
  std::map<std::string, Label> by_id;
  for (const auto& p : predictions) by_id[p.doc_id] = p.label;
  CrossTab t;
  for (const auto& a : annotations) {
    auto it = by_id.find(a.doc_id);
    if (it == by_id.end()) fail(ErrorKind::kData, "annotation for unknown document " + a.doc_id);
    const std::size_t row = it->second == Label::kPositive ? 0 : 1;
    const std::size_t col = a.sentiment == Sentiment::kPositive   ? 0
                            : a.sentiment == Sentiment::kNegative ? 1
                                                                  : 2;
    ++t.counts[row][col];
  }
  return t;
}

SweepReport sweep_report(std::vector<SweepPoint> points) {
  std::sort(points.begin(), points.end(),
            [](const SweepPoint& a, const SweepPoint& b) { return a.x < b.x; });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].x == points[i - 1].x) {
      fail(ErrorKind::kData, "sweep_report: duplicate x " + format_number(points[i].x));
    }
  }
  SweepReport out;
  out.csv = csv::format_row({"x", "accuracy", "n"});
  json rows = json::array();
  for (const auto& p : points) {
    if (p.reports.empty()) fail(ErrorKind::kData, "sweep point without reports");
    std::vector<double> acc;
    for (const auto& r : p.reports) acc.push_back(r.accuracy);
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= static_cast<double>(acc.size());
    char abuf[32];
    std::snprintf(abuf, sizeof abuf, "%.6f", mean);
    out.csv += csv::format_row({format_number(p.x), abuf, std::to_string(p.reports.front().n)});
    json row{{"x", p.x}, {"mean_accuracy", mean}, {"n", p.reports.front().n}, {"per_seed", acc}};
    if (acc.size() >= 2) {
      const SeedInterval si = ci_over_seeds(acc);
      row["ci95_half_width"] = si.half_width;
    }
    rows.push_back(row);
  }
  out.summary = {{"points", rows}};
  return out;
}

}  // namespace llambert
