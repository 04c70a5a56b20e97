// SPDX-License-Identifier: Apache-2.0

#include "llambert/llambert.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/annotator.hpp"
#include "core/classifier.hpp"
#include "core/corpus.hpp"
#include "core/dataset.hpp"
#include "core/evalkit.hpp"
#include "core/experiments.hpp"
#include "core/kvconfig.hpp"
#include "core/prompt.hpp"

namespace lb = llambert;

struct llb_strlist {
  std::vector<std::string> items;
};
struct llb_corpus {
  lb::Corpus value;
};
struct llb_prompt_spec {
  lb::PromptSpec value;
};
struct llb_backend_config {
  lb::BackendConfig value;
};
struct llb_labelset {
  lb::LabelSet value;
};
struct llb_plan {
  lb::TrainingPlan value;
};
struct llb_model {
  lb::LinearModel value;
};
struct llb_predictions {
  std::vector<lb::Prediction> items;
  lb::LabelNames names;
};
struct llb_report {
  lb::MetricsReport value;
  lb::LabelNames names{"negative", "positive"};
};

namespace {

thread_local std::string g_last_error;

llb_status status_of(lb::ErrorKind k) {
  switch (k) {
    case lb::ErrorKind::kUsage: return LLB_ERR_USAGE;
    case lb::ErrorKind::kData: return LLB_ERR_DATA;
    case lb::ErrorKind::kIo: return LLB_ERR_IO;
    case lb::ErrorKind::kNumeric: return LLB_ERR_NUMERIC;
  }
  return LLB_ERR_INTERNAL;
}

template <typename F>
llb_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LLB_OK;
  } catch (const lb::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LLB_ERR_INTERNAL;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return LLB_ERR_DATA;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return LLB_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LLB_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) lb::fail(lb::ErrorKind::kUsage, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

lb::Split to_split(llb_split s) {
  switch (s) {
    case LLB_SPLIT_TRAIN: return lb::Split::kTrain;
    case LLB_SPLIT_TEST: return lb::Split::kTest;
    case LLB_SPLIT_EXTRA: return lb::Split::kExtra;
    case LLB_SPLIT_UNSPLIT: return lb::Split::kUnsplit;
  }
  lb::fail(lb::ErrorKind::kUsage, "invalid split value");
}

llb_split from_split(lb::Split s) {
  switch (s) {
    case lb::Split::kTrain: return LLB_SPLIT_TRAIN;
    case lb::Split::kTest: return LLB_SPLIT_TEST;
    case lb::Split::kExtra: return LLB_SPLIT_EXTRA;
    case lb::Split::kUnsplit: return LLB_SPLIT_UNSPLIT;
  }
  return LLB_SPLIT_UNSPLIT;
}

lb::Strategy to_strategy(llb_strategy s) {
  switch (s) {
    case LLB_STRATEGY_BASELINE: return lb::Strategy::kBaseline;
    case LLB_STRATEGY_LLAMBERT_TRAIN: return lb::Strategy::kLlambertTrain;
    case LLB_STRATEGY_LLAMBERT_TRAIN_EXTRA: return lb::Strategy::kLlambertTrainExtra;
    case LLB_STRATEGY_COMBINED: return lb::Strategy::kCombinedExtraThenTrain;
  }
  lb::fail(lb::ErrorKind::kUsage, "invalid strategy value");
}

lb::Hyper to_hyper(const llb_hyper* h) {
  lb::Hyper out;
  if (!h) return out;
  out.dim_bits = h->dim_bits;
  out.learning_rate = h->learning_rate;
  out.l2 = h->l2;
  out.epochs_per_stage = h->epochs_per_stage;
  out.batch_size = h->batch_size;
  return out;
}

std::set<std::string> to_set(const llb_strlist* list) {
  if (!list) return {};
  return {list->items.begin(), list->items.end()};
}

}  // namespace

extern "C" {

// ---- general ---------------------------------------------------------------

const char* llb_version(void) { return lb::version_string(); }
const char* llb_last_error(void) { return g_last_error.c_str(); }
void llb_string_free(char* s) { std::free(s); }

uint64_t llb_fnv1a64(const char* data, size_t len) {
  return data ? lb::fnv1a64(std::string_view(data, len)) : lb::kFnvOffset;
}

llb_status llb_file_digest(const char* path, char** hex_out) {
  return guarded([&] {
    require(path && hex_out, "llb_file_digest: null argument");
    set_out(hex_out, lb::file_digest(path));
  });
}

llb_status llb_split_from_name(const char* name, llb_split* out) {
  return guarded([&] {
    require(name && out, "llb_split_from_name: null argument");
    *out = from_split(lb::split_from_name(name));
  });
}

const char* llb_split_name(llb_split split) {
  switch (split) {
    case LLB_SPLIT_TRAIN: return "train";
    case LLB_SPLIT_TEST: return "test";
    case LLB_SPLIT_EXTRA: return "extra";
    case LLB_SPLIT_UNSPLIT: return "unsplit";
  }
  return "unsplit";
}

llb_status llb_strategy_from_name(const char* name, llb_strategy* out) {
  return guarded([&] {
    require(name && out, "llb_strategy_from_name: null argument");
    switch (lb::strategy_from_name(name)) {
      case lb::Strategy::kBaseline: *out = LLB_STRATEGY_BASELINE; break;
      case lb::Strategy::kLlambertTrain: *out = LLB_STRATEGY_LLAMBERT_TRAIN; break;
      case lb::Strategy::kLlambertTrainExtra: *out = LLB_STRATEGY_LLAMBERT_TRAIN_EXTRA; break;
      case lb::Strategy::kCombinedExtraThenTrain: *out = LLB_STRATEGY_COMBINED; break;
    }
  });
}

const char* llb_strategy_name(llb_strategy s) {
  switch (s) {
    case LLB_STRATEGY_BASELINE: return "baseline";
    case LLB_STRATEGY_LLAMBERT_TRAIN: return "llambert_train";
    case LLB_STRATEGY_LLAMBERT_TRAIN_EXTRA: return "llambert_train_extra";
    case LLB_STRATEGY_COMBINED: return "combined";
  }
  return "baseline";
}

// ---- string lists ----------------------------------------------------------

llb_status llb_strlist_create(llb_strlist** out) {
  return guarded([&] {
    require(out, "llb_strlist_create: null out");
    *out = new llb_strlist{};
  });
}

llb_status llb_strlist_push(llb_strlist* list, const char* s) {
  return guarded([&] {
    require(list && s, "llb_strlist_push: null argument");
    list->items.emplace_back(s);
  });
}

size_t llb_strlist_size(const llb_strlist* list) { return list ? list->items.size() : 0; }

const char* llb_strlist_get(const llb_strlist* list, size_t i) {
  if (!list || i >= list->items.size()) return nullptr;
  return list->items[i].c_str();
}

llb_status llb_strlist_read_lines(const char* path, llb_strlist** out) {
  return guarded([&] {
    require(path && out, "llb_strlist_read_lines: null argument");
    auto list = std::make_unique<llb_strlist>();
    for (auto& line : lb::read_lines(path)) {
      std::string t = lb::trim(line);
      if (!t.empty()) list->items.push_back(std::move(t));
    }
    *out = list.release();
  });
}

llb_status llb_strlist_write_lines(const llb_strlist* list, const char* path) {
  return guarded([&] {
    require(list && path, "llb_strlist_write_lines: null argument");
    std::string all;
    for (const auto& s : list->items) {
      all += s;
      all += '\n';
    }
    lb::write_file(path, all);
  });
}

void llb_strlist_free(llb_strlist* list) { delete list; }

// ---- corpus ----------------------------------------------------------------

llb_status llb_corpus_ingest_jsonl(const char* path, const char* task_id, const char* label0,
                                   const char* label1, llb_corpus** out) {
  return guarded([&] {
    require(path && task_id && label0 && label1 && out, "llb_corpus_ingest_jsonl: null argument");
    *out = new llb_corpus{lb::ingest_jsonl(path, task_id, {label0, label1})};
  });
}

llb_status llb_corpus_ingest_imdb_dir(const char* root, llb_corpus** out) {
  return guarded([&] {
    require(root && out, "llb_corpus_ingest_imdb_dir: null argument");
    *out = new llb_corpus{lb::ingest_imdb_dir(root)};
  });
}

llb_status llb_corpus_ingest_umls_tsv(const char* path, llb_split split, llb_corpus** out) {
  return guarded([&] {
    require(path && out, "llb_corpus_ingest_umls_tsv: null argument");
    *out = new llb_corpus{lb::ingest_umls_tsv(path, to_split(split))};
  });
}

llb_status llb_corpus_load(const char* path, llb_corpus** out) {
  return guarded([&] {
    require(path && out, "llb_corpus_load: null argument");
    *out = new llb_corpus{lb::load_corpus(path)};
  });
}

llb_status llb_corpus_save(const llb_corpus* corpus, const char* path) {
  return guarded([&] {
    require(corpus && path, "llb_corpus_save: null argument");
    lb::save_corpus(corpus->value, path);
  });
}

void llb_corpus_free(llb_corpus* corpus) { delete corpus; }

size_t llb_corpus_size(const llb_corpus* c) { return c ? c->value.size() : 0; }

size_t llb_corpus_split_size(const llb_corpus* c, llb_split split) {
  if (!c) return 0;
  try {
    return c->value.split_size(to_split(split));
  } catch (...) {
    return 0;
  }
}

const char* llb_corpus_task_id(const llb_corpus* c) { return c ? c->value.task_id().c_str() : ""; }

const char* llb_corpus_label_name(const llb_corpus* c, int index) {
  if (!c || index < 0 || index > 1) return nullptr;
  return c->value.label_names()[static_cast<std::size_t>(index)].c_str();
}

llb_status llb_corpus_ids(const llb_corpus* c, llb_split split, llb_strlist** out) {
  return guarded([&] {
    require(c && out, "llb_corpus_ids: null argument");
    *out = new llb_strlist{c->value.ids_in(to_split(split))};
  });
}

llb_status llb_corpus_sample(const llb_corpus* c, llb_split split, size_t n, uint64_t seed,
                             llb_strlist** out) {
  return guarded([&] {
    require(c && out, "llb_corpus_sample: null argument");
    *out = new llb_strlist{lb::sample_subset(c->value, to_split(split), n, seed)};
  });
}

// ---- prompts ---------------------------------------------------------------

llb_status llb_prompt_spec_default(const char* task, size_t k, const llb_corpus* source,
                                   llb_split source_split, const llb_strlist* exclude,
                                   llb_prompt_spec** out) {
  return guarded([&] {
    require(task && out, "llb_prompt_spec_default: null argument");
    require(source || k == 0, "llb_prompt_spec_default: k > 0 needs an exemplar source");
    const std::string t = task;
    lb::Corpus empty(t, t == "umls" ? lb::kUmlsLabels : lb::kImdbLabels);
    const lb::Corpus& src = source ? source->value : empty;
    if (t == "imdb") {
      *out = new llb_prompt_spec{lb::default_imdb_spec(k, src, to_split(source_split), to_set(exclude))};
    } else if (t == "umls") {
      *out = new llb_prompt_spec{lb::default_umls_spec(k, src, to_split(source_split), to_set(exclude))};
    } else {
      lb::fail(lb::ErrorKind::kUsage, "unknown prompt task '" + t + "' (imdb, umls)");
    }
  });
}

llb_status llb_prompt_spec_from_config(const char* config_path, size_t k,
                                       const llb_corpus* source, llb_split source_split,
                                       const llb_strlist* exclude, llb_prompt_spec** out) {
  return guarded([&] {
    require(config_path && out, "llb_prompt_spec_from_config: null argument");
    require(source || k == 0, "llb_prompt_spec_from_config: k > 0 needs an exemplar source");
    const lb::KvConfig cfg = lb::KvConfig::load(config_path);
    lb::PromptSpec spec = lb::spec_from_config(cfg);
    if (k > 0) {
      spec.exemplars = lb::select_exemplars(source->value, to_split(source_split),
                                            lb::composition_for(cfg, spec, k), to_set(exclude),
                                            spec.exemplar_char_budget);
    }
    spec.validate();
    *out = new llb_prompt_spec{std::move(spec)};
  });
}

void llb_prompt_spec_free(llb_prompt_spec* spec) { delete spec; }

uint64_t llb_prompt_spec_hash(const llb_prompt_spec* spec) {
  return spec ? spec->value.spec_hash() : 0;
}

size_t llb_prompt_spec_exemplar_count(const llb_prompt_spec* spec) {
  return spec ? spec->value.exemplars.size() : 0;
}

const char* llb_prompt_spec_exemplar_id(const llb_prompt_spec* spec, size_t i) {
  if (!spec || i >= spec->value.exemplars.size()) return nullptr;
  return spec->value.exemplars[i].doc_id.c_str();
}

llb_status llb_prompt_render(const llb_prompt_spec* spec, const llb_corpus* corpus,
                             const char* doc_id, char** flat_text, char** messages_json,
                             uint64_t* prompt_hash) {
  return guarded([&] {
    require(spec && corpus && doc_id, "llb_prompt_render: null argument");
    const lb::RenderedPrompt r = lb::render(spec->value, corpus->value.at(doc_id));
    set_out(flat_text, r.flat_text);
    if (messages_json) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& m : r.messages) arr.push_back({{"role", m.role}, {"content", m.content}});
      set_out(messages_json, arr.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
    }
    if (prompt_hash) *prompt_hash = r.prompt_hash;
  });
}

llb_status llb_parse_response(const llb_prompt_spec* spec, const char* response_text, int* label,
                              const char** discard_reason) {
  return guarded([&] {
    require(spec && response_text && label, "llb_parse_response: null argument");
    const lb::ParseOutcome outcome = lb::parse_response(response_text, spec->value.lexicon);
    if (const auto* l = std::get_if<lb::Label>(&outcome)) {
      *label = static_cast<int>(lb::index_of(*l));
      if (discard_reason) *discard_reason = nullptr;
    } else {
      *label = -1;
      const bool ambiguous = std::get<lb::Discard>(outcome).reason == "ambiguous";
      if (discard_reason) *discard_reason = ambiguous ? "ambiguous" : "no-label";
    }
  });
}

// ---- backend configuration -------------------------------------------------

llb_status llb_backend_config_create(const char* kind, llb_backend_config** out) {
  return guarded([&] {
    require(kind && out, "llb_backend_config_create: null argument");
    lb::KvConfig kv;
    kv.set("backend.kind", kind);
    lb::BackendConfig cfg = lb::backend_from_config(kv);
    if (cfg.kind == lb::BackendKind::kHttpChat) cfg.model_name = "llama-2-70b-chat";
    *out = new llb_backend_config{std::move(cfg)};
  });
}

llb_status llb_backend_config_load(llb_backend_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg && path, "llb_backend_config_load: null argument");
    cfg->value = lb::backend_from_config(lb::KvConfig::load(path), cfg->value);
  });
}

llb_status llb_backend_config_set(llb_backend_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "llb_backend_config_set: null argument");
    static const std::set<std::string> known = {
        "kind",        "base_url",           "model",          "temperature",
        "max_tokens",  "max_in_flight",      "retry.max_attempts", "retry.initial_backoff_ms",
        "retry.multiplier", "error_rate",    "garbage_rate",   "seed",
        "api_key_env", "timeout_s"};
    if (!known.count(key)) lb::fail(lb::ErrorKind::kUsage, std::string("unknown backend key '") + key + "'");
    lb::KvConfig kv;
    kv.set(std::string("backend.") + key, value);
    cfg->value = lb::backend_from_config(kv, cfg->value);
  });
}

llb_status llb_backend_config_describe(const llb_backend_config* cfg, char** json_out) {
  return guarded([&] {
    require(cfg && json_out, "llb_backend_config_describe: null argument");
    set_out(json_out, cfg->value.to_json().dump());
  });
}

void llb_backend_config_free(llb_backend_config* cfg) { delete cfg; }

// ---- labels ----------------------------------------------------------------

llb_status llb_label_subset(const llb_corpus* corpus, const llb_strlist* doc_ids,
                            const llb_prompt_spec* spec, const llb_backend_config* backend,
                            const char* cache_path, llb_labelset** out, char** manifest_out) {
  return guarded([&] {
    require(corpus && doc_ids && spec && backend && out, "llb_label_subset: null argument");
    auto be = lb::make_backend(backend->value);
    lb::ResponseCache cache(cache_path ? std::filesystem::path(cache_path) : std::filesystem::path());
    lb::LabelSubsetResult res =
        lb::label_subset(doc_ids->items, corpus->value, spec->value, *be, cache);
    set_out(manifest_out, res.manifest.dump(2));
    *out = new llb_labelset{std::move(res.labels)};
  });
}

llb_status llb_labelset_gold(const llb_corpus* corpus, int split, llb_labelset** out) {
  return guarded([&] {
    require(corpus && out, "llb_labelset_gold: null argument");
    std::optional<lb::Split> s;
    if (split >= 0) s = to_split(static_cast<llb_split>(split));
    *out = new llb_labelset{lb::gold_labelset(corpus->value, s)};
  });
}

llb_status llb_labelset_load(const char* labels_path, const char* discards_path,
                             const llb_corpus* corpus, llb_labelset** out) {
  return guarded([&] {
    require(labels_path && corpus && out, "llb_labelset_load: null argument");
    *out = new llb_labelset{lb::load_labelset(
        labels_path, discards_path ? std::filesystem::path(discards_path) : std::filesystem::path(),
        corpus->value.task_id(), corpus->value.label_names())};
  });
}

llb_status llb_labelset_save(const llb_labelset* set, const char* labels_path,
                             const char* discards_path) {
  return guarded([&] {
    require(set && labels_path, "llb_labelset_save: null argument");
    lb::save_labelset(set->value, labels_path,
                      discards_path ? std::filesystem::path(discards_path) : std::filesystem::path());
  });
}

size_t llb_labelset_size(const llb_labelset* set) { return set ? set->value.size() : 0; }
size_t llb_labelset_discard_count(const llb_labelset* set) {
  return set ? set->value.discards().size() : 0;
}

llb_status llb_labelset_get(const llb_labelset* set, const char* doc_id, int* label) {
  return guarded([&] {
    require(set && doc_id && label, "llb_labelset_get: null argument");
    const auto l = set->value.label_of(doc_id);
    *label = l ? static_cast<int>(lb::index_of(*l)) : -1;
  });
}

void llb_labelset_free(llb_labelset* set) { delete set; }

llb_status llb_agreement(const llb_labelset* a, const llb_labelset* b, double* rate,
                         size_t* intersection) {
  return guarded([&] {
    require(a && b && rate, "llb_agreement: null argument");
    const lb::Agreement ag = lb::agreement(a->value, b->value);
    *rate = ag.disagreement_rate;
    if (intersection) *intersection = ag.intersection;
  });
}

// ---- plans -----------------------------------------------------------------

llb_status llb_plan_build(llb_strategy strategy, const llb_corpus* corpus,
                          const llb_labelset* llm_labels, llb_split eval_split, llb_plan** out) {
  return guarded([&] {
    require(corpus && out, "llb_plan_build: null argument");
    *out = new llb_plan{lb::build_plan(to_strategy(strategy), corpus->value,
                                       llm_labels ? &llm_labels->value : nullptr,
                                       to_split(eval_split))};
  });
}

llb_status llb_plan_export(const llb_plan* plan, const char* dir) {
  return guarded([&] {
    require(plan && dir, "llb_plan_export: null argument");
    lb::export_plan(plan->value, dir);
  });
}

llb_status llb_plan_load(const char* dir, llb_plan** out) {
  return guarded([&] {
    require(dir && out, "llb_plan_load: null argument");
    *out = new llb_plan{lb::load_plan(dir)};
  });
}

void llb_plan_free(llb_plan* plan) { delete plan; }

size_t llb_plan_stage_count(const llb_plan* plan) { return plan ? plan->value.stages.size() : 0; }

size_t llb_plan_stage_size(const llb_plan* plan, size_t stage) {
  if (!plan || stage >= plan->value.stages.size()) return 0;
  return plan->value.stages[stage].examples.size();
}

const char* llb_plan_stage_name(const llb_plan* plan, size_t stage) {
  if (!plan || stage >= plan->value.stages.size()) return nullptr;
  return plan->value.stages[stage].name.c_str();
}

size_t llb_plan_eval_size(const llb_plan* plan) { return plan ? plan->value.eval.size() : 0; }

const char* llb_plan_label_name(const llb_plan* plan, int index) {
  if (!plan || index < 0 || index > 1) return nullptr;
  return plan->value.label_names[static_cast<std::size_t>(index)].c_str();
}

llb_status llb_plan_inject_noise(llb_plan* plan, size_t stage, double fraction, uint64_t seed,
                                 size_t* flipped) {
  return guarded([&] {
    require(plan, "llb_plan_inject_noise: null plan");
    require(stage < plan->value.stages.size(), "llb_plan_inject_noise: stage out of range");
    auto& st = plan->value.stages[stage];
    lb::Stage noised = lb::inject_noise(st, fraction, seed);
    if (flipped) {
      *flipped = 0;
      for (std::size_t i = 0; i < st.examples.size(); ++i) {
        if (st.examples[i].label != noised.examples[i].label) ++*flipped;
      }
    }
    st = std::move(noised);
  });
}

llb_status llb_plan_size_sweep(const llb_plan* plan, size_t stage, const size_t* sizes,
                               size_t n_sizes, uint64_t seed, llb_plan** outs) {
  return guarded([&] {
    require(plan && (sizes || n_sizes == 0) && (outs || n_sizes == 0), "llb_plan_size_sweep: null argument");
    require(stage < plan->value.stages.size(), "llb_plan_size_sweep: stage out of range");
    std::vector<std::size_t> sz(sizes, sizes + n_sizes);
    auto family = lb::size_sweep(plan->value.stages[stage], sz, seed);
    std::vector<std::unique_ptr<llb_plan>> made;
    for (auto& [size, sub] : family) {
      auto p = std::make_unique<llb_plan>(llb_plan{plan->value});
      p->value.stages[stage] = std::move(sub);
      made.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < made.size(); ++i) outs[i] = made[i].release();
  });
}

llb_status llb_plan_eval_labels(const llb_plan* plan, llb_labelset** out) {
  return guarded([&] {
    require(plan && out, "llb_plan_eval_labels: null argument");
    *out = new llb_labelset{
        lb::labelset_from_examples(plan->value.eval, plan->value.task_id, plan->value.label_names)};
  });
}

// ---- classifier ------------------------------------------------------------

void llb_hyper_default(llb_hyper* out) {
  if (!out) return;
  const lb::Hyper h;
  *out = llb_hyper{h.dim_bits, h.learning_rate, h.l2, h.epochs_per_stage, h.batch_size};
}

llb_status llb_model_train(const llb_plan* plan, const llb_hyper* hyper, uint64_t seed,
                           llb_model** out) {
  return guarded([&] {
    require(plan && out, "llb_model_train: null argument");
    *out = new llb_model{lb::train(plan->value, to_hyper(hyper), seed)};
  });
}

llb_status llb_model_save(const llb_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "llb_model_save: null argument");
    lb::save_model(model->value, path);
  });
}

llb_status llb_model_load(const char* path, llb_model** out) {
  return guarded([&] {
    require(path && out, "llb_model_load: null argument");
    *out = new llb_model{lb::load_model(path)};
  });
}

void llb_model_free(llb_model* model) { delete model; }

size_t llb_model_weight_count(const llb_model* m) { return m ? m->value.weights.size() : 0; }
size_t llb_model_log_length(const llb_model* m) { return m ? m->value.training_log.size() : 0; }

llb_status llb_model_log_entry(const llb_model* m, size_t i, const char** stage, int* epoch,
                               double* mean_loss) {
  return guarded([&] {
    require(m && i < m->value.training_log.size(), "llb_model_log_entry: index out of range");
    const auto& e = m->value.training_log[i];
    if (stage) *stage = e.stage.c_str();
    if (epoch) *epoch = e.epoch;
    if (mean_loss) *mean_loss = e.mean_loss;
  });
}

llb_status llb_model_predict_plan(const llb_model* model, const llb_plan* plan,
                                  llb_predictions** out) {
  return guarded([&] {
    require(model && plan && out, "llb_model_predict_plan: null argument");
    *out = new llb_predictions{lb::predict(model->value, plan->value.eval), plan->value.label_names};
  });
}

llb_status llb_model_predict_corpus(const llb_model* model, const llb_corpus* corpus,
                                    llb_split split, llb_predictions** out) {
  return guarded([&] {
    require(model && corpus && out, "llb_model_predict_corpus: null argument");
    *out = new llb_predictions{lb::predict_corpus(model->value, corpus->value, to_split(split)),
                               corpus->value.label_names()};
  });
}

llb_status llb_predictions_save(const llb_predictions* preds, const char* path) {
  return guarded([&] {
    require(preds && path, "llb_predictions_save: null argument");
    lb::save_predictions(preds->items, preds->names, path);
  });
}

llb_status llb_predictions_load(const char* path, const char* label0, const char* label1,
                                llb_predictions** out) {
  return guarded([&] {
    require(path && label0 && label1 && out, "llb_predictions_load: null argument");
    lb::LabelNames names{label0, label1};
    *out = new llb_predictions{lb::load_predictions(path, names), names};
  });
}

size_t llb_predictions_size(const llb_predictions* p) { return p ? p->items.size() : 0; }

llb_status llb_predictions_get(const llb_predictions* p, size_t i, const char** doc_id, int* label,
                               double* score) {
  return guarded([&] {
    require(p && i < p->items.size(), "llb_predictions_get: index out of range");
    const auto& pr = p->items[i];
    if (doc_id) *doc_id = pr.doc_id.c_str();
    if (label) *label = static_cast<int>(lb::index_of(pr.label));
    if (score) *score = pr.score;
  });
}

void llb_predictions_free(llb_predictions* p) { delete p; }

// ---- evaluation ------------------------------------------------------------

llb_status llb_evaluate(const llb_predictions* preds, const llb_labelset* gold, llb_report** out) {
  return guarded([&] {
    require(preds && gold && out, "llb_evaluate: null argument");
    *out = new llb_report{lb::evaluate(preds->items, gold->value), gold->value.label_names()};
  });
}

double llb_report_accuracy(const llb_report* r) { return r ? r->value.accuracy : 0.0; }
size_t llb_report_n(const llb_report* r) { return r ? r->value.n : 0; }

void llb_report_confusion(const llb_report* r, size_t confusion[4]) {
  if (!r || !confusion) return;
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t p = 0; p < 2; ++p) confusion[2 * g + p] = r->value.confusion[g][p];
  }
}

llb_status llb_report_set_manifest(llb_report* r, const char* manifest_ref) {
  return guarded([&] {
    require(r && manifest_ref, "llb_report_set_manifest: null argument");
    r->value.manifest = manifest_ref;
  });
}

llb_status llb_report_to_json(const llb_report* r, char** json_out) {
  return guarded([&] {
    require(r && json_out, "llb_report_to_json: null argument");
    set_out(json_out, r->value.to_json(r->names).dump(2) + "\n");
  });
}

llb_status llb_report_table(const llb_report* r, char** table_out) {
  return guarded([&] {
    require(r && table_out, "llb_report_table: null argument");
    set_out(table_out, r->value.confusion_table(r->names));
  });
}

llb_status llb_report_from_json(const char* json, llb_report** out) {
  return guarded([&] {
    require(json && out, "llb_report_from_json: null argument");
    const auto j = nlohmann::json::parse(json);
    auto r = std::make_unique<llb_report>();
    r->value = lb::MetricsReport::from_json(j);
    if (j.contains("confusion") && j["confusion"].contains("labels")) {
      const auto& l = j["confusion"]["labels"];
      r->names = {l.at(0).get<std::string>(), l.at(1).get<std::string>()};
    }
    *out = r.release();
  });
}

void llb_report_free(llb_report* r) { delete r; }

llb_status llb_ci_over_seeds(const double* values, size_t n, double* mean, double* half_width) {
  return guarded([&] {
    require((values || n == 0) && mean && half_width, "llb_ci_over_seeds: null argument");
    const lb::SeedInterval si = lb::ci_over_seeds(std::vector<double>(values, values + n));
    *mean = si.mean;
    *half_width = si.half_width;
  });
}

llb_status llb_format_interval(double mean, double half_width, int decimals, char** out) {
  return guarded([&] {
    require(out, "llb_format_interval: null argument");
    set_out(out, lb::format_interval(mean, half_width, decimals));
  });
}

llb_status llb_sample_errors(const llb_predictions* preds, const llb_labelset* gold, size_t n,
                             uint64_t seed, llb_strlist** ids_out, size_t* disagreements) {
  return guarded([&] {
    require(preds && gold && ids_out, "llb_sample_errors: null argument");
    lb::ErrorSample s = lb::sample_errors(preds->items, gold->value, n, seed);
    if (disagreements) *disagreements = s.disagreements;
    *ids_out = new llb_strlist{std::move(s.ids)};
  });
}

llb_status llb_export_errors_csv(const llb_strlist* ids, const llb_plan* plan,
                                 const llb_corpus* corpus, const char* path) {
  return guarded([&] {
    require(ids && path && ((plan != nullptr) != (corpus != nullptr)),
            "llb_export_errors_csv: need ids, path and exactly one text source");
    std::map<std::string, std::string> texts;
    if (plan) {
      for (const auto& e : plan->value.eval) texts.emplace(e.id, e.text);
    }
    lb::export_errors_csv(
        ids->items,
        [&](const std::string& id) -> std::string {
          if (corpus) return corpus->value.at(id).text;
          auto it = texts.find(id);
          if (it == texts.end()) lb::fail(lb::ErrorKind::kData, "no text for document " + id);
          return it->second;
        },
        path);
  });
}

llb_status llb_crosstab_human(const char* annotations_csv, const llb_predictions* preds,
                              size_t counts[6], char** table_out, char** csv_out) {
  return guarded([&] {
    require(annotations_csv && preds && counts, "llb_crosstab_human: null argument");
    const auto ann = lb::load_human_annotations(annotations_csv, preds->names);
    const lb::CrossTab t = lb::crosstab_human(ann, preds->items);
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 3; ++c) counts[3 * r + c] = t.counts[r][c];
    }
    set_out(table_out, t.render(preds->names));
    set_out(csv_out, t.to_csv(preds->names));
  });
}

llb_status llb_sweep_run(const llb_plan* plan, const char* kind, const double* xs, size_t n_xs,
                         size_t n_seeds, uint64_t base_seed, const llb_hyper* hyper, int stage,
                         unsigned workers, char** csv_out, char** summary_json_out) {
  return guarded([&] {
    require(plan && kind && (xs || n_xs == 0), "llb_sweep_run: null argument");
    lb::SweepConfig cfg;
    cfg.kind = lb::sweep_kind_from_name(kind);
    cfg.xs.assign(xs, xs + n_xs);
    cfg.n_seeds = n_seeds;
    cfg.base_seed = base_seed;
    if (stage >= 0) cfg.stage_index = static_cast<std::size_t>(stage);
    cfg.hyper = to_hyper(hyper);
    cfg.workers = workers;
    const lb::SweepReport rep = lb::sweep_report(lb::run_sweep(plan->value, cfg));
    set_out(csv_out, rep.csv);
    nlohmann::json summary = rep.summary;
    summary["kind"] = kind;
    summary["n_seeds"] = n_seeds;
    summary["base_seed"] = base_seed;
    summary["strategy"] = std::string(lb::strategy_name(plan->value.strategy));
    set_out(summary_json_out, summary.dump(2) + "\n");
  });
}

llb_status llb_sweep_report(const double* xs, const llb_report* const* reports, size_t n_points,
                            size_t per_point, char** csv_out) {
  return guarded([&] {
    require((xs && reports) || n_points == 0, "llb_sweep_report: null argument");
    require(csv_out && per_point > 0, "llb_sweep_report: need csv_out and per_point > 0");
    std::vector<lb::SweepPoint> pts(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
      pts[i].x = xs[i];
      for (std::size_t s = 0; s < per_point; ++s) {
        const llb_report* r = reports[i * per_point + s];
        require(r, "llb_sweep_report: null report");
        pts[i].reports.push_back(r->value);
      }
    }
    set_out(csv_out, lb::sweep_report(std::move(pts)).csv);
  });
}

}  // extern "C"
