// SPDX-License-Identifier: Apache-2.0
//
// llambert command-line driver. Links only the C API.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llambert/llambert.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& msg) { throw CliError{kExitUsage, msg}; }

void check(llb_status st) {
  if (st == LLB_OK) return;
  throw CliError{st == LLB_ERR_USAGE ? kExitUsage : kExitData, llb_last_error()};
}

// Takes ownership of a char* returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  llb_string_free(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Corpus = std::unique_ptr<llb_corpus, Deleter<llb_corpus, llb_corpus_free>>;
using StrList = std::unique_ptr<llb_strlist, Deleter<llb_strlist, llb_strlist_free>>;
using Spec = std::unique_ptr<llb_prompt_spec, Deleter<llb_prompt_spec, llb_prompt_spec_free>>;
using Backend =
    std::unique_ptr<llb_backend_config, Deleter<llb_backend_config, llb_backend_config_free>>;
using Labels = std::unique_ptr<llb_labelset, Deleter<llb_labelset, llb_labelset_free>>;
using Plan = std::unique_ptr<llb_plan, Deleter<llb_plan, llb_plan_free>>;
using Model = std::unique_ptr<llb_model, Deleter<llb_model, llb_model_free>>;
using Preds = std::unique_ptr<llb_predictions, Deleter<llb_predictions, llb_predictions_free>>;
using Report = std::unique_ptr<llb_report, Deleter<llb_report, llb_report_free>>;

Corpus load_corpus(const std::string& path) {
  llb_corpus* c = nullptr;
  check(llb_corpus_load(path.c_str(), &c));
  return Corpus(c);
}

Plan load_plan(const std::string& dir) {
  llb_plan* p = nullptr;
  check(llb_plan_load(dir.c_str(), &p));
  return Plan(p);
}

llb_split parse_split(const std::string& name) {
  llb_split s;
  if (llb_split_from_name(name.c_str(), &s) != LLB_OK) usage_error(llb_last_error());
  return s;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string digest(const std::string& path) {
  char* hex = nullptr;
  check(llb_file_digest(path.c_str(), &hex));
  return take(hex);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw CliError{kExitData, "cannot write " + path.string()};
}

// One RunManifest line per invocation, appended to <dir>/manifest.jsonl.
class RunManifest {
 public:
  RunManifest(std::string command, const CLI::App& sub) : started_(iso_now()) {
    j_["command"] = std::move(command);
    json opts = json::object();
    for (const CLI::Option* o : sub.get_options()) {
      if (o->get_name() == "--help" || o->count() == 0) continue;
      opts[o->get_name()] = o->results();
    }
    j_["options"] = opts;
    inputs_ = json::object();
    seeds_ = json::object();
    counts_ = json::object();
    artifacts_ = json::array();
  }

  void input(const std::string& path) {
    if (fs::is_directory(path)) {
      for (const char* f : {"plan.json"}) {
        if (fs::exists(fs::path(path) / f)) inputs_[(fs::path(path) / f).string()] = digest((fs::path(path) / f).string());
      }
      return;
    }
    inputs_[path] = digest(path);
  }
  void config(const std::string& path) {
    if (path.empty()) return;
    config_hash_ += digest(path);
    input(path);
  }
  void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }
  void count(const std::string& name, std::uint64_t v) { counts_[name] = v; }
  void artifact(const fs::path& p) { artifacts_.push_back(p.string()); }
  void detail(const std::string& key, json v) { j_[key] = std::move(v); }

  void append_to(const fs::path& dir) {
    j_["config_hash"] = hash_options();
    j_["inputs"] = inputs_;
    j_["seeds"] = seeds_;
    j_["counts"] = counts_;
    j_["artifacts"] = artifacts_;
    j_["library_version"] = llb_version();
    j_["started_at"] = started_;
    j_["finished_at"] = iso_now();
    fs::create_directories(dir);
    std::ofstream out(dir / "manifest.jsonl", std::ios::binary | std::ios::app);
    out << j_.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    if (!out) throw CliError{kExitData, "cannot append " + (dir / "manifest.jsonl").string()};
  }

 private:
  std::string hash_options() const {
    const std::string s = j_["options"].dump() + "|" + config_hash_;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(llb_fnv1a64(s.data(), s.size())));
    return buf;
  }

  json j_;
  json inputs_, seeds_, counts_, artifacts_;
  std::string config_hash_;
  std::string started_;
};

void print_dry_run(const std::string& command, const json& plan) {
  json j = {{"dry_run", true}, {"command", command}};
  j.update(plan);
  std::cout << j.dump(2) << "\n";
}

struct HyperFlags {
  llb_hyper h{};
  HyperFlags() { llb_hyper_default(&h); }
  void add(CLI::App* sub) {
    sub->add_option("--dim-bits", h.dim_bits, "Hashed feature space bits")->capture_default_str();
    sub->add_option("--lr", h.learning_rate, "Base learning rate")->capture_default_str();
    sub->add_option("--l2", h.l2, "L2 penalty")->capture_default_str();
    sub->add_option("--epochs", h.epochs_per_stage, "Epochs per stage")->capture_default_str();
    sub->add_option("--batch-size", h.batch_size, "Minibatch size")->capture_default_str();
  }
  json to_json() const {
    return {{"dim_bits", h.dim_bits},
            {"learning_rate", h.learning_rate},
            {"l2", h.l2},
            {"epochs_per_stage", h.epochs_per_stage},
            {"batch_size", h.batch_size}};
  }
};

// Gold source shared by eval / errors: a plan's eval set, or a corpus split.
struct GoldSource {
  std::string plan_dir, corpus, split = "test";

  void add(CLI::App* sub) {
    sub->add_option("--plan", plan_dir, "Plan directory (gold = its eval set)");
    sub->add_option("--corpus", corpus, "Corpus file (gold = labels of --split)");
    sub->add_option("--split", split, "Corpus split for gold labels")->capture_default_str();
  }
  void validate() const {
    if (plan_dir.empty() == corpus.empty()) usage_error("give exactly one of --plan or --corpus");
  }
  void record(RunManifest& m) const { m.input(plan_dir.empty() ? corpus : plan_dir); }

  std::array<std::string, 2> names(Plan& plan, Corpus& c) const {
    if (plan) return {llb_plan_label_name(plan.get(), 0), llb_plan_label_name(plan.get(), 1)};
    return {llb_corpus_label_name(c.get(), 0), llb_corpus_label_name(c.get(), 1)};
  }
  void open(Plan& plan, Corpus& c) const {
    if (!plan_dir.empty()) {
      plan = load_plan(plan_dir);
    } else {
      c = load_corpus(corpus);
    }
  }
  Labels gold(Plan& plan, Corpus& c) const {
    llb_labelset* l = nullptr;
    if (plan) {
      check(llb_plan_eval_labels(plan.get(), &l));
    } else {
      check(llb_labelset_gold(c.get(), static_cast<int>(parse_split(split)), &l));
    }
    return Labels(l);
  }
};

Preds load_predictions(const std::string& path, const std::array<std::string, 2>& names) {
  llb_predictions* p = nullptr;
  check(llb_predictions_load(path.c_str(), names[0].c_str(), names[1].c_str(), &p));
  return Preds(p);
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const char* flag) {
  std::vector<double> xs;
  for (const std::string& item : split_csv_list(s)) {
    try {
      std::size_t used = 0;
      xs.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage_error(std::string(flag) + ": not a number '" + item + "'");
    }
  }
  if (xs.empty()) usage_error(std::string(flag) + " is empty");
  return xs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"llambert: label a corpus with an LLM and train a small classifier on it"};
  app.set_version_flag("--version", llb_version());
  app.require_subcommand(1);
  app.fallthrough();
  bool dry_run = false;
  app.add_flag("--dry-run", dry_run, "Print what would be done without writing anything");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Read a raw dataset into a corpus file");
  std::string in_imdb, in_jsonl, in_umls, in_task = "custom", in_labels = "negative,positive",
                                                in_split = "unsplit", in_out;
  auto* g_src = ingest->add_option_group("source");
  g_src->add_option("--imdb-dir", in_imdb, "aclImdb directory");
  g_src->add_option("--jsonl", in_jsonl, "JSONL with id, text, split, gold_label");
  g_src->add_option("--umls-tsv", in_umls, "TSV: id, term, synonyms, yes/no");
  g_src->require_option(1);
  ingest->add_option("--task-id", in_task, "Task id for --jsonl")->capture_default_str();
  ingest->add_option("--label-names", in_labels, "Label names for --jsonl (first,second)")
      ->capture_default_str();
  ingest->add_option("--split", in_split, "Split assigned to --umls-tsv rows")->capture_default_str();
  ingest->add_option("--out", in_out, "Output directory, or a path ending in .jsonl")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "Draw a seeded subset of document ids");
  std::string sa_corpus, sa_split, sa_out;
  std::size_t sa_n = 0;
  std::uint64_t sa_seed = 0;
  sample->add_option("--corpus", sa_corpus, "Corpus file")->required();
  sample->add_option("--split", sa_split, "Split to sample from")->required();
  sample->add_option("--n", sa_n, "Number of documents")->required();
  sample->add_option("--seed", sa_seed, "Random seed")->required();
  sample->add_option("--out", sa_out, "Output directory")->required();

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Label documents with an LLM backend");
  std::string an_corpus, an_split = "extra", an_ids, an_backend = "mock", an_config, an_prompt,
                         an_task, an_ex_split = "train", an_cache, an_out;
  std::optional<std::size_t> an_n;
  std::optional<std::uint64_t> an_seed;
  std::optional<double> an_eps, an_delta;
  std::optional<std::string> an_base_url, an_model;
  std::size_t an_shots = 0;
  annotate->add_option("--corpus", an_corpus, "Corpus file")->required();
  annotate->add_option("--split", an_split, "Split to label")->capture_default_str();
  annotate->add_option("--n", an_n, "Sample this many documents of --split (default: all)");
  annotate->add_option("--ids", an_ids, "File with one document id per line");
  annotate->add_option("--seed", an_seed, "Seed for sampling and the mock oracle");
  annotate->add_option("--backend", an_backend, "mock or http")->capture_default_str();
  annotate->add_option("--config", an_config, "Key/value config with backend.* keys");
  annotate->add_option("--prompt-config", an_prompt, "Key/value prompt config");
  annotate->add_option("--task", an_task, "Built-in prompt: imdb or umls (default: corpus task id)");
  annotate->add_option("--shots", an_shots, "Number of exemplars")->capture_default_str();
  annotate->add_option("--exemplar-split", an_ex_split, "Split exemplars are drawn from")
      ->capture_default_str();
  annotate->add_option("--error-rate", an_eps, "Mock oracle label flip rate");
  annotate->add_option("--garbage-rate", an_delta, "Mock oracle unparseable-answer rate");
  annotate->add_option("--base-url", an_base_url, "HTTP backend base URL");
  annotate->add_option("--model", an_model, "HTTP backend model name");
  annotate->add_option("--cache", an_cache, "Response cache (default: <out>/responses.jsonl)");
  annotate->add_option("--out", an_out, "Output directory")->required();

  // build
  auto* build = app.add_subcommand("build", "Assemble a training plan and export stage files");
  std::string bu_corpus, bu_strategy, bu_labels, bu_discards, bu_eval = "test", bu_out;
  build->add_option("--corpus", bu_corpus, "Corpus file")->required();
  build->add_option("--strategy", bu_strategy,
                    "baseline, llambert_train, llambert_train_extra or combined")
      ->required();
  build->add_option("--labels", bu_labels, "LLM labels.jsonl");
  build->add_option("--discards", bu_discards, "LLM discards.jsonl");
  build->add_option("--eval-split", bu_eval, "Evaluation split")->capture_default_str();
  build->add_option("--out", bu_out, "Output directory")->required();

  // noise
  auto* noise = app.add_subcommand("noise", "Flip a seeded fraction of one stage's labels");
  std::string no_plan, no_out;
  double no_fraction = 0;
  std::optional<std::size_t> no_stage;
  std::uint64_t no_seed = 0;
  noise->add_option("--plan", no_plan, "Plan directory")->required();
  noise->add_option("--fraction", no_fraction, "Fraction of labels to flip")->required();
  noise->add_option("--stage", no_stage, "Stage index (default: last)");
  noise->add_option("--seed", no_seed, "Random seed")->required();
  noise->add_option("--out", no_out, "Output plan directory")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Accuracy over noise fractions or subset sizes");
  std::string sw_plan, sw_kind, sw_fractions, sw_sizes, sw_out;
  std::size_t sw_seeds = 5;
  std::uint64_t sw_seed = 0;
  int sw_stage = -1;
  unsigned sw_workers = 0;
  HyperFlags sw_hyper;
  sweep->add_option("--plan", sw_plan, "Plan directory")->required();
  sweep->add_option("--kind", sw_kind, "noise or size")->required();
  sweep->add_option("--fractions", sw_fractions, "Comma-separated noise fractions");
  sweep->add_option("--sizes", sw_sizes, "Comma-separated subset sizes");
  sweep->add_option("--seeds", sw_seeds, "Seeds per point")->capture_default_str();
  sweep->add_option("--seed", sw_seed, "Base seed; seed i is base + i")->required();
  sweep->add_option("--stage", sw_stage, "Stage index (default: last)");
  sweep->add_option("--workers", sw_workers, "Parallel jobs (0 = all cores)")->capture_default_str();
  sw_hyper.add(sweep);
  sweep->add_option("--out", sw_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train the native classifier on a plan");
  std::string tr_plan, tr_out;
  std::uint64_t tr_seed = 0;
  HyperFlags tr_hyper;
  train->add_option("--plan", tr_plan, "Plan directory")->required();
  train->add_option("--seed", tr_seed, "Random seed")->required();
  tr_hyper.add(train);
  train->add_option("--out", tr_out, "Output directory")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Score documents with a trained model");
  std::string pr_model, pr_plan, pr_corpus, pr_split = "test", pr_out;
  predict->add_option("--model", pr_model, "model.json")->required();
  predict->add_option("--plan", pr_plan, "Plan directory (scores its eval set)");
  predict->add_option("--corpus", pr_corpus, "Corpus file (scores --split)");
  predict->add_option("--split", pr_split, "Corpus split")->capture_default_str();
  predict->add_option("--out", pr_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Accuracy and confusion matrix of predictions");
  std::string ev_preds, ev_out;
  GoldSource ev_gold;
  eval->add_option("--predictions", ev_preds, "predictions.jsonl")->required();
  ev_gold.add(eval);
  eval->add_option("--out", ev_out, "Output directory")->required();

  // errors
  auto* errors = app.add_subcommand("errors", "Export a seeded sample of misclassified documents");
  std::string er_preds, er_out;
  std::size_t er_n = 100;
  std::uint64_t er_seed = 0;
  GoldSource er_gold;
  errors->add_option("--predictions", er_preds, "predictions.jsonl")->required();
  er_gold.add(errors);
  errors->add_option("--n", er_n, "Sample size")->capture_default_str();
  errors->add_option("--seed", er_seed, "Random seed")->required();
  errors->add_option("--out", er_out, "Output directory")->required();

  // crosstab
  auto* crosstab = app.add_subcommand("crosstab", "Model outputs against human sentiment");
  std::string ct_human, ct_preds, ct_labels = "negative,positive", ct_out;
  crosstab->add_option("--human", ct_human, "human_annotations.csv (doc_id,sentiment)")->required();
  crosstab->add_option("--predictions", ct_preds, "predictions.jsonl")->required();
  crosstab->add_option("--label-names", ct_labels, "Label names (first,second)")
      ->capture_default_str();
  crosstab->add_option("--out", ct_out, "Output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "Seed intervals and label agreement");
  report->require_subcommand(1);
  auto* ci = report->add_subcommand("ci", "Mean and 95% t-interval of accuracy over seeds");
  std::vector<std::string> ci_reports;
  std::string ci_values, ci_out;
  int ci_decimals = 2;
  bool ci_percent = false;
  ci->add_option("--reports", ci_reports, "report.json files, one per seed");
  ci->add_option("--values", ci_values, "Comma-separated per-seed values");
  ci->add_flag("--percent", ci_percent, "Scale accuracies to percentages");
  ci->add_option("--decimals", ci_decimals, "Decimals in the printed interval")->capture_default_str();
  ci->add_option("--out", ci_out, "Output directory for ci.json");
  auto* agree = report->add_subcommand("agreement", "Disagreement rate between two label sets");
  std::string ag_corpus, ag_labels, ag_against, ag_gold_split, ag_out;
  agree->add_option("--corpus", ag_corpus, "Corpus file")->required();
  agree->add_option("--labels", ag_labels, "labels.jsonl")->required();
  agree->add_option("--against", ag_against, "Second labels.jsonl (default: gold labels)");
  agree->add_option("--gold-split", ag_gold_split, "Restrict gold labels to one split");
  agree->add_option("--out", ag_out, "Output directory for agreement.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (const CLI::App* sub : app.get_subcommands()) {
      failed = sub;
      for (const CLI::App* inner : sub->get_subcommands()) failed = inner;
    }
    std::cerr << failed->help();
    return kExitUsage;
  }

  try {
    // ---------------------------------------------------------------- ingest
    if (*ingest) {
      const bool file_out = fs::path(in_out).extension() == ".jsonl";
      const fs::path corpus_path = file_out ? fs::path(in_out) : fs::path(in_out) / "corpus.jsonl";
      fs::path dir = corpus_path.parent_path();
      if (dir.empty()) dir = ".";
      RunManifest m("ingest", *ingest);
      llb_corpus* raw = nullptr;
      if (!in_imdb.empty()) {
        check(llb_corpus_ingest_imdb_dir(in_imdb.c_str(), &raw));
      } else if (!in_jsonl.empty()) {
        m.input(in_jsonl);
        const auto names = split_csv_list(in_labels);
        if (names.size() != 2) usage_error("--label-names needs exactly two names");
        check(llb_corpus_ingest_jsonl(in_jsonl.c_str(), in_task.c_str(), names[0].c_str(),
                                      names[1].c_str(), &raw));
      } else {
        m.input(in_umls);
        check(llb_corpus_ingest_umls_tsv(in_umls.c_str(), parse_split(in_split), &raw));
      }
      Corpus c(raw);
      json counts = json::object();
      for (llb_split s : {LLB_SPLIT_TRAIN, LLB_SPLIT_TEST, LLB_SPLIT_EXTRA, LLB_SPLIT_UNSPLIT}) {
        counts[llb_split_name(s)] = llb_corpus_split_size(c.get(), s);
      }
      if (dry_run) {
        print_dry_run("ingest", {{"documents", llb_corpus_size(c.get())},
                                 {"splits", counts},
                                 {"would_write", {corpus_path.string(), (dir / "manifest.jsonl").string()}}});
        return 0;
      }
      check(llb_corpus_save(c.get(), corpus_path.c_str()));
      m.count("documents", llb_corpus_size(c.get()));
      for (auto& [k, v] : counts.items()) m.count(k, v.get<std::uint64_t>());
      m.artifact(corpus_path);
      m.append_to(dir);
      std::cout << "ingested " << llb_corpus_size(c.get()) << " documents into " << corpus_path.string() << "\n";
      return 0;
    }

    // ---------------------------------------------------------------- sample
    if (*sample) {
      RunManifest m("sample", *sample);
      m.input(sa_corpus);
      Corpus c = load_corpus(sa_corpus);
      llb_strlist* ids = nullptr;
      check(llb_corpus_sample(c.get(), parse_split(sa_split), sa_n, sa_seed, &ids));
      StrList list(ids);
      const fs::path out = fs::path(sa_out) / "ids.txt";
      if (dry_run) {
        print_dry_run("sample", {{"sampled", llb_strlist_size(list.get())},
                                 {"would_write", {out.string(), (fs::path(sa_out) / "manifest.jsonl").string()}}});
        return 0;
      }
      check(llb_strlist_write_lines(list.get(), out.c_str()));
      m.seed("seed", sa_seed);
      m.count("sampled", llb_strlist_size(list.get()));
      m.artifact(out);
      m.append_to(sa_out);
      std::cout << "sampled " << llb_strlist_size(list.get()) << " ids into " << out.string() << "\n";
      return 0;
    }

    // -------------------------------------------------------------- annotate
    if (*annotate) {
      if (an_n && !an_ids.empty()) usage_error("give at most one of --n or --ids");
      const bool stochastic = an_n.has_value() || an_backend == "mock";
      if (stochastic && !an_seed) usage_error("--seed is required (sampling or mock backend)");
      RunManifest m("annotate", *annotate);
      m.input(an_corpus);
      Corpus c = load_corpus(an_corpus);
      const llb_split split = parse_split(an_split);

      StrList ids;
      llb_strlist* raw = nullptr;
      if (!an_ids.empty()) {
        m.input(an_ids);
        check(llb_strlist_read_lines(an_ids.c_str(), &raw));
      } else if (an_n) {
        check(llb_corpus_sample(c.get(), split, *an_n, *an_seed, &raw));
      } else {
        check(llb_corpus_ids(c.get(), split, &raw));
      }
      ids.reset(raw);

      llb_backend_config* braw = nullptr;
      check(llb_backend_config_create(an_backend.c_str(), &braw));
      Backend backend(braw);
      if (!an_config.empty()) {
        m.config(an_config);
        check(llb_backend_config_load(backend.get(), an_config.c_str()));
      }
      auto set = [&](const char* key, const std::string& v) {
        check(llb_backend_config_set(backend.get(), key, v.c_str()));
      };
      if (an_eps) set("error_rate", std::to_string(*an_eps));
      if (an_delta) set("garbage_rate", std::to_string(*an_delta));
      if (an_seed) set("seed", std::to_string(*an_seed));
      if (an_base_url) set("base_url", *an_base_url);
      if (an_model) set("model", *an_model);

      const llb_split ex_split = parse_split(an_ex_split);
      llb_prompt_spec* sraw = nullptr;
      if (!an_prompt.empty()) {
        m.config(an_prompt);
        check(llb_prompt_spec_from_config(an_prompt.c_str(), an_shots, c.get(), ex_split, ids.get(), &sraw));
      } else {
        const std::string task = an_task.empty() ? llb_corpus_task_id(c.get()) : an_task;
        if (task != "imdb" && task != "umls") {
          usage_error("no built-in prompt for task '" + task + "'; pass --task or --prompt-config");
        }
        check(llb_prompt_spec_default(task.c_str(), an_shots, c.get(), ex_split, ids.get(), &sraw));
      }
      Spec spec(sraw);

      const fs::path out(an_out);
      const fs::path cache = an_cache.empty() ? out / "responses.jsonl" : fs::path(an_cache);
      if (dry_run) {
        print_dry_run("annotate",
                      {{"documents", llb_strlist_size(ids.get())},
                       {"backend", json::parse(take([&] {
                          char* d = nullptr;
                          check(llb_backend_config_describe(backend.get(), &d));
                          return d;
                        }()))},
                       {"exemplars", llb_prompt_spec_exemplar_count(spec.get())},
                       {"would_write",
                        {(out / "labels.jsonl").string(), (out / "discards.jsonl").string(),
                         cache.string(), (out / "manifest.jsonl").string()}}});
        return 0;
      }
      llb_labelset* lraw = nullptr;
      char* manifest = nullptr;
      check(llb_label_subset(c.get(), ids.get(), spec.get(), backend.get(), cache.c_str(), &lraw,
                             &manifest));
      Labels labels(lraw);
      const json details = json::parse(take(manifest));
      const fs::path lp = out / "labels.jsonl", dp = out / "discards.jsonl";
      check(llb_labelset_save(labels.get(), lp.c_str(), dp.c_str()));
      if (an_seed) m.seed("seed", *an_seed);
      m.count("sampled", llb_strlist_size(ids.get()));
      m.count("labeled", llb_labelset_size(labels.get()));
      m.count("discarded", llb_labelset_discard_count(labels.get()));
      m.count("gold_disagreements", details.value("gold_disagreements", 0));
      m.detail("labeling", details);
      m.artifact(lp);
      m.artifact(dp);
      m.artifact(cache);
      m.append_to(out);
      std::cout << "labeled " << llb_labelset_size(labels.get()) << ", discarded "
                << llb_labelset_discard_count(labels.get()) << ", gold disagreements "
                << details.value("gold_disagreements", 0) << " of "
                << details.value("gold_compared", 0) << "\n";
      return 0;
    }

    // ----------------------------------------------------------------- build
    if (*build) {
      llb_strategy strategy;
      if (llb_strategy_from_name(bu_strategy.c_str(), &strategy) != LLB_OK) usage_error(llb_last_error());
      if (strategy != LLB_STRATEGY_BASELINE && bu_labels.empty()) {
        usage_error("--labels is required for strategy " + bu_strategy);
      }
      RunManifest m("build", *build);
      m.input(bu_corpus);
      Corpus c = load_corpus(bu_corpus);
      Labels llm;
      if (!bu_labels.empty()) {
        m.input(bu_labels);
        if (!bu_discards.empty()) m.input(bu_discards);
        llb_labelset* l = nullptr;
        check(llb_labelset_load(bu_labels.c_str(), bu_discards.empty() ? nullptr : bu_discards.c_str(),
                                c.get(), &l));
        llm.reset(l);
      }
      llb_plan* praw = nullptr;
      check(llb_plan_build(strategy, c.get(), llm.get(), parse_split(bu_eval), &praw));
      Plan plan(praw);
      json stages = json::array();
      for (std::size_t i = 0; i < llb_plan_stage_count(plan.get()); ++i) {
        stages.push_back({{"name", llb_plan_stage_name(plan.get(), i)},
                          {"examples", llb_plan_stage_size(plan.get(), i)}});
      }
      if (dry_run) {
        print_dry_run("build", {{"strategy", llb_strategy_name(strategy)},
                                {"stages", stages},
                                {"eval", llb_plan_eval_size(plan.get())},
                                {"would_write", bu_out}});
        return 0;
      }
      check(llb_plan_export(plan.get(), bu_out.c_str()));
      for (std::size_t i = 0; i < llb_plan_stage_count(plan.get()); ++i) {
        m.count(std::string("stage") + std::to_string(i) + "_" + llb_plan_stage_name(plan.get(), i),
                llb_plan_stage_size(plan.get(), i));
        m.artifact(fs::path(bu_out) / ("train_stage" + std::to_string(i) + ".jsonl"));
      }
      m.count("eval", llb_plan_eval_size(plan.get()));
      m.artifact(fs::path(bu_out) / "eval.jsonl");
      m.artifact(fs::path(bu_out) / "plan.json");
      m.append_to(bu_out);
      std::cout << stages.dump() << " eval=" << llb_plan_eval_size(plan.get()) << "\n";
      return 0;
    }

    // ----------------------------------------------------------------- noise
    if (*noise) {
      RunManifest m("noise", *noise);
      m.input(no_plan);
      Plan plan = load_plan(no_plan);
      const std::size_t n_stages = llb_plan_stage_count(plan.get());
      const std::size_t stage = no_stage.value_or(n_stages - 1);
      if (stage >= n_stages) usage_error("--stage out of range");
      std::size_t flipped = 0;
      check(llb_plan_inject_noise(plan.get(), stage, no_fraction, no_seed, &flipped));
      if (dry_run) {
        print_dry_run("noise", {{"stage", stage}, {"flipped", flipped}, {"would_write", no_out}});
        return 0;
      }
      check(llb_plan_export(plan.get(), no_out.c_str()));
      m.seed("seed", no_seed);
      m.count("stage", stage);
      m.count("flipped", flipped);
      m.count("stage_size", llb_plan_stage_size(plan.get(), stage));
      m.artifact(no_out);
      m.append_to(no_out);
      std::cout << "flipped " << flipped << " of " << llb_plan_stage_size(plan.get(), stage)
                << " labels in stage " << stage << "\n";
      return 0;
    }

    // ----------------------------------------------------------------- sweep
    if (*sweep) {
      std::vector<double> xs;
      if (sw_kind == "noise") {
        if (sw_fractions.empty() || !sw_sizes.empty()) usage_error("--kind noise needs --fractions");
        xs = parse_numbers(sw_fractions, "--fractions");
      } else if (sw_kind == "size") {
        if (sw_sizes.empty() || !sw_fractions.empty()) usage_error("--kind size needs --sizes");
        xs = parse_numbers(sw_sizes, "--sizes");
      } else {
        usage_error("--kind must be noise or size");
      }
      if (sw_seeds == 0) usage_error("--seeds must be positive");
      RunManifest m("sweep", *sweep);
      m.input(sw_plan);
      Plan plan = load_plan(sw_plan);
      const fs::path csv = fs::path(sw_out) / "sweep.csv";
      const fs::path summary = fs::path(sw_out) / "sweep_summary.json";
      if (dry_run) {
        print_dry_run("sweep", {{"kind", sw_kind},
                                {"points", xs},
                                {"seeds", sw_seeds},
                                {"jobs", xs.size() * sw_seeds},
                                {"would_write", {csv.string(), summary.string()}}});
        return 0;
      }
      char* csv_text = nullptr;
      char* summary_text = nullptr;
      check(llb_sweep_run(plan.get(), sw_kind.c_str(), xs.data(), xs.size(), sw_seeds, sw_seed,
                          &sw_hyper.h, sw_stage, sw_workers, &csv_text, &summary_text));
      const std::string csv_s = take(csv_text), summary_s = take(summary_text);
      write_text(csv, csv_s);
      write_text(summary, summary_s);
      for (std::size_t i = 0; i < sw_seeds; ++i) m.seed("seed" + std::to_string(i), sw_seed + i);
      m.count("points", xs.size());
      m.detail("hyper", sw_hyper.to_json());
      m.artifact(csv);
      m.artifact(summary);
      m.append_to(sw_out);
      std::cout << csv_s;
      return 0;
    }

    // ----------------------------------------------------------------- train
    if (*train) {
      RunManifest m("train", *train);
      m.input(tr_plan);
      Plan plan = load_plan(tr_plan);
      const fs::path out = fs::path(tr_out) / "model.json";
      if (dry_run) {
        json stages = json::array();
        for (std::size_t i = 0; i < llb_plan_stage_count(plan.get()); ++i) {
          stages.push_back({{"name", llb_plan_stage_name(plan.get(), i)},
                            {"examples", llb_plan_stage_size(plan.get(), i)}});
        }
        print_dry_run("train", {{"stages", stages}, {"hyper", tr_hyper.to_json()}, {"would_write", out.string()}});
        return 0;
      }
      llb_model* mraw = nullptr;
      check(llb_model_train(plan.get(), &tr_hyper.h, tr_seed, &mraw));
      Model model(mraw);
      check(llb_model_save(model.get(), out.c_str()));
      json log = json::array();
      for (std::size_t i = 0; i < llb_model_log_length(model.get()); ++i) {
        const char* stage = nullptr;
        int epoch = 0;
        double loss = 0;
        check(llb_model_log_entry(model.get(), i, &stage, &epoch, &loss));
        log.push_back({{"stage", stage}, {"epoch", epoch}, {"mean_loss", loss}});
      }
      m.seed("seed", tr_seed);
      m.detail("hyper", tr_hyper.to_json());
      m.detail("training_log", log);
      m.count("weights", llb_model_weight_count(model.get()));
      m.artifact(out);
      m.append_to(tr_out);
      std::cout << "trained " << log.size() << " epochs; model at " << out.string() << "\n";
      return 0;
    }

    // --------------------------------------------------------------- predict
    if (*predict) {
      if (pr_plan.empty() == pr_corpus.empty()) usage_error("give exactly one of --plan or --corpus");
      RunManifest m("predict", *predict);
      m.input(pr_model);
      llb_model* mraw = nullptr;
      check(llb_model_load(pr_model.c_str(), &mraw));
      Model model(mraw);
      Plan plan;
      Corpus c;
      llb_predictions* praw = nullptr;
      if (!pr_plan.empty()) {
        m.input(pr_plan);
        plan = load_plan(pr_plan);
        check(llb_model_predict_plan(model.get(), plan.get(), &praw));
      } else {
        m.input(pr_corpus);
        c = load_corpus(pr_corpus);
        check(llb_model_predict_corpus(model.get(), c.get(), parse_split(pr_split), &praw));
      }
      Preds preds(praw);
      const fs::path out = fs::path(pr_out) / "predictions.jsonl";
      if (dry_run) {
        print_dry_run("predict", {{"documents", llb_predictions_size(preds.get())}, {"would_write", out.string()}});
        return 0;
      }
      check(llb_predictions_save(preds.get(), out.c_str()));
      m.count("predicted", llb_predictions_size(preds.get()));
      m.artifact(out);
      m.append_to(pr_out);
      std::cout << "wrote " << llb_predictions_size(preds.get()) << " predictions to " << out.string() << "\n";
      return 0;
    }

    // ------------------------------------------------------------------ eval
    if (*eval) {
      ev_gold.validate();
      RunManifest m("eval", *eval);
      m.input(ev_preds);
      ev_gold.record(m);
      Plan plan;
      Corpus c;
      ev_gold.open(plan, c);
      Labels gold = ev_gold.gold(plan, c);
      Preds preds = load_predictions(ev_preds, ev_gold.names(plan, c));
      llb_report* rraw = nullptr;
      check(llb_evaluate(preds.get(), gold.get(), &rraw));
      Report rep(rraw);
      const fs::path out = fs::path(ev_out) / "report.json";
      // Relative to the report: the manifest line this run appends.
      std::size_t manifest_line = 1;
      if (std::ifstream in(fs::path(ev_out) / "manifest.jsonl"); in) {
        for (std::string l; std::getline(in, l);) manifest_line += !l.empty();
      }
      const std::string manifest_ref = "manifest.jsonl#" + std::to_string(manifest_line);
      check(llb_report_set_manifest(rep.get(), manifest_ref.c_str()));
      const std::string table = take([&] {
        char* t = nullptr;
        check(llb_report_table(rep.get(), &t));
        return t;
      }());
      if (dry_run) {
        print_dry_run("eval", {{"n", llb_report_n(rep.get())}, {"would_write", out.string()}});
        return 0;
      }
      const std::string text = take([&] {
        char* j = nullptr;
        check(llb_report_to_json(rep.get(), &j));
        return j;
      }());
      write_text(out, text);
      m.count("n", llb_report_n(rep.get()));
      m.artifact(out);
      m.append_to(ev_out);
      std::cout << table;
      std::printf("accuracy %.4f (n=%zu)\n", llb_report_accuracy(rep.get()), llb_report_n(rep.get()));
      return 0;
    }

    // ---------------------------------------------------------------- errors
    if (*errors) {
      er_gold.validate();
      RunManifest m("errors", *errors);
      m.input(er_preds);
      er_gold.record(m);
      Plan plan;
      Corpus c;
      er_gold.open(plan, c);
      Labels gold = er_gold.gold(plan, c);
      Preds preds = load_predictions(er_preds, er_gold.names(plan, c));
      llb_strlist* iraw = nullptr;
      std::size_t disagreements = 0;
      check(llb_sample_errors(preds.get(), gold.get(), er_n, er_seed, &iraw, &disagreements));
      StrList ids(iraw);
      const fs::path out = fs::path(er_out) / "errors_export.csv";
      if (dry_run) {
        print_dry_run("errors", {{"disagreements", disagreements},
                                 {"sampled", llb_strlist_size(ids.get())},
                                 {"would_write", out.string()}});
        return 0;
      }
      check(llb_export_errors_csv(ids.get(), plan.get(), plan ? nullptr : c.get(), out.c_str()));
      m.seed("seed", er_seed);
      m.count("disagreements", disagreements);
      m.count("sampled", llb_strlist_size(ids.get()));
      m.artifact(out);
      m.append_to(er_out);
      std::cout << "exported " << llb_strlist_size(ids.get()) << " of " << disagreements
                << " misclassified documents to " << out.string() << "\n";
      return 0;
    }

    // -------------------------------------------------------------- crosstab
    if (*crosstab) {
      const auto names = split_csv_list(ct_labels);
      if (names.size() != 2) usage_error("--label-names needs exactly two names");
      RunManifest m("crosstab", *crosstab);
      m.input(ct_human);
      m.input(ct_preds);
      Preds preds = load_predictions(ct_preds, {names[0], names[1]});
      std::size_t counts[6];
      char* table = nullptr;
      char* csv = nullptr;
      check(llb_crosstab_human(ct_human.c_str(), preds.get(), counts, &table, &csv));
      const std::string table_s = take(table), csv_s = take(csv);
      const fs::path out = fs::path(ct_out) / "crosstab.csv";
      if (dry_run) {
        print_dry_run("crosstab", {{"would_write", out.string()}});
        return 0;
      }
      write_text(out, csv_s);
      std::size_t total = 0;
      for (std::size_t v : counts) total += v;
      m.count("matched", total);
      m.artifact(out);
      m.append_to(ct_out);
      std::cout << table_s;
      return 0;
    }

    // ---------------------------------------------------------------- report
    if (*ci) {
      if (ci_reports.empty() == ci_values.empty()) usage_error("give exactly one of --reports or --values");
      RunManifest m("report ci", *ci);
      std::vector<double> values;
      if (!ci_values.empty()) {
        values = parse_numbers(ci_values, "--values");
      } else {
        for (const std::string& path : ci_reports) {
          m.input(path);
          std::ifstream in(path, std::ios::binary);
          if (!in) throw CliError{kExitData, "cannot read " + path};
          std::stringstream ss;
          ss << in.rdbuf();
          llb_report* r = nullptr;
          check(llb_report_from_json(ss.str().c_str(), &r));
          Report rep(r);
          values.push_back(llb_report_accuracy(rep.get()) * (ci_percent ? 100.0 : 1.0));
        }
      }
      double mean = 0, half = 0;
      check(llb_ci_over_seeds(values.data(), values.size(), &mean, &half));
      char* f = nullptr;
      check(llb_format_interval(mean, half, ci_decimals, &f));
      const std::string formatted = take(f);
      if (dry_run) {
        print_dry_run("report ci", {{"values", values}, {"would_write", ci_out}});
        return 0;
      }
      if (!ci_out.empty()) {
        const fs::path out = fs::path(ci_out) / "ci.json";
        write_text(out, json{{"values", values}, {"mean", mean}, {"half_width", half},
                             {"formatted", formatted}}.dump(2) + "\n");
        m.count("seeds", values.size());
        m.artifact(out);
        m.append_to(ci_out);
      }
      std::cout << formatted << "\n";
      return 0;
    }

    if (*agree) {
      RunManifest m("report agreement", *agree);
      m.input(ag_corpus);
      m.input(ag_labels);
      Corpus c = load_corpus(ag_corpus);
      llb_labelset* a = nullptr;
      check(llb_labelset_load(ag_labels.c_str(), nullptr, c.get(), &a));
      Labels la(a);
      llb_labelset* b = nullptr;
      if (!ag_against.empty()) {
        m.input(ag_against);
        check(llb_labelset_load(ag_against.c_str(), nullptr, c.get(), &b));
      } else {
        const int split = ag_gold_split.empty() ? -1 : static_cast<int>(parse_split(ag_gold_split));
        check(llb_labelset_gold(c.get(), split, &b));
      }
      Labels lb(b);
      double rate = 0;
      std::size_t inter = 0;
      check(llb_agreement(la.get(), lb.get(), &rate, &inter));
      if (dry_run) {
        print_dry_run("report agreement", {{"would_write", ag_out}});
        return 0;
      }
      if (!ag_out.empty()) {
        const fs::path out = fs::path(ag_out) / "agreement.json";
        write_text(out, json{{"disagreement_rate", rate}, {"intersection", inter}}.dump(2) + "\n");
        m.count("intersection", inter);
        m.artifact(out);
        m.append_to(ag_out);
      }
      std::printf("disagreement %.4f over %zu documents\n", rate, inter);
      return 0;
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
