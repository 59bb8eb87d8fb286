#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semlog/anomaly.hpp"
#include "semlog/bpmn.hpp"
#include "semlog/dataset.hpp"
#include "semlog/detect.hpp"
#include "semlog/eval.hpp"
#include "semlog/event_log.hpp"
#include "semlog/llm_client.hpp"
#include "semlog/playout.hpp"
#include "semlog/process_tree.hpp"
#include "semlog/splits.hpp"

namespace semlog::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kTransportError = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

struct LoadedModels {
  std::vector<ProcessTree> trees;
  std::vector<std::string> files;
  std::vector<std::pair<std::string, std::string>> skipped;  // file, reason
};

inline bool is_tree_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".ptree" || ext == ".pt" || ext == ".tree";
}

inline bool is_bpmn_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".bpmn" || ext == ".xml";
}

/// Parses every *.ptree/*.pt/*.tree (tree notation) and *.bpmn/*.xml file in
/// `dir`, in file name order. The model id is the file stem.
inline LoadedModels load_models(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("models directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && (is_tree_file(e.path()) || is_bpmn_file(e.path()))) paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());

  LoadedModels out;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    const std::string name = p.filename().string();
    try {
      const std::string id = p.stem().string();
      if (!ids.insert(id).second) throw ModelError("duplicate model id '" + id + "'");
      const std::string text = read_file(p);
      out.trees.push_back(is_tree_file(p) ? parse_process_tree(text, id) : parse_bpmn(text, id));
      out.files.push_back(name);
    } catch (const Error& e) {
      out.skipped.emplace_back(name, e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  fs::path models_dir;
  fs::path out_dir;
  std::uint64_t seed = 0;
  PlayoutConfig playout;
  std::optional<std::size_t> holdout;
  std::optional<std::size_t> d2_models;
  std::size_t jobs = 1;
};

inline nlohmann::ordered_json cmd_generate(const GenerateOptions& opt, std::ostream& log = std::cerr) {
  LoadedModels models = load_models(opt.models_dir);
  for (const auto& [file, why] : models.skipped) log << "warning: skipping " << file << ": " << why << '\n';
  if (models.trees.empty()) throw DataError("no parseable models in '" + opt.models_dir.string() + "'");

  const std::size_t n = models.trees.size();
  SplitConfig cfg;
  cfg.seed = opt.seed;
  cfg.playout = opt.playout;
  cfg.jobs = opt.jobs;
  cfg.n_holdout = opt.holdout.value_or(n < 2 ? 0 : std::max<std::size_t>(1, n / 5));
  if (cfg.n_holdout >= n)
    throw UsageError("--holdout " + std::to_string(cfg.n_holdout) + " leaves no training models (" +
                     std::to_string(n) + " parsed)");
  cfg.n_d2_models = opt.d2_models.value_or(std::max<std::size_t>(1, (n - cfg.n_holdout) / 5));

  SplitBundle bundle = build_splits(models.trees, cfg);

  fs::create_directories(opt.out_dir);
  auto write_split = [&](const char* name, const std::vector<QAExample>& xs) {
    auto out = open_out(opt.out_dir / name);
    emit_jsonl(xs, out);
  };
  write_split("train.jsonl", bundle.train);
  write_split("d1.jsonl", bundle.d1);
  write_split("d2.jsonl", bundle.d2);
  {
    auto out = open_out(opt.out_dir / "anomalies.jsonl");
    auto dump = [&out](const char* split, const std::vector<AnomalyRecord>& recs) {
      for (const auto& r : recs) {
        auto j = to_json(r);
        j["split"] = split;
        out << dump_line(j) << '\n';
      }
    };
    dump("train", bundle.train_anomalies);
    dump("d1", bundle.d1_anomalies);
    dump("d2", bundle.d2_anomalies);
  }

  auto& man = bundle.manifest;
  man["model_files"] = models.files;
  auto& skipped = man["skipped"] = nlohmann::ordered_json::array();
  for (const auto& [file, why] : models.skipped) skipped.push_back({{"file", file}, {"error", why}});
  {
    auto out = open_out(opt.out_dir / "manifest.json");
    out << man.dump(2) << '\n';
  }
  log << "generated " << bundle.train.size() << " train, " << bundle.d1.size() << " d1, " << bundle.d2.size()
      << " d2 examples from " << n << " models\n";
  return man;
}

// ---------------------------------------------------------------------------

enum class Backend { Oracle, Pairs, Llm };

struct DetectOptions {
  fs::path dataset;
  fs::path out = "predictions.jsonl";
  Backend backend = Backend::Oracle;
  std::optional<fs::path> models_dir;
  std::optional<fs::path> train_normals;
  PlayoutConfig playout;
  EndpointConfig endpoint;
};

struct DetectSummary {
  std::size_t written = 0;
  std::size_t failed = 0;
  std::size_t n_unparseable = 0;
  bool transport_failure = false;
};

inline nlohmann::ordered_json prediction_json(const TraceItem& it, const Verdict& v) {
  nlohmann::ordered_json j;
  j["id"] = it.id;
  j["model_id"] = it.model_id;
  j["label"] = to_string(v.label);
  j["cause"] = v.cause ? nlohmann::ordered_json(*v.cause) : nlohmann::ordered_json(nullptr);
  j["parse_ok"] = v.parse_ok;
  j["raw"] = v.raw ? nlohmann::ordered_json(*v.raw) : nlohmann::ordered_json(nullptr);
  if (it.count != 1) j["count"] = it.count;
  return j;
}

inline std::vector<TraceItem> load_items_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return load_trace_items(in);
}

inline DetectSummary cmd_detect(const DetectOptions& opt, std::ostream& log = std::cerr) {
  const auto items = load_items_file(opt.dataset);
  std::vector<std::optional<Verdict>> verdicts(items.size());
  DetectSummary sum;

  switch (opt.backend) {
    case Backend::Oracle: {
      if (!opt.models_dir) throw UsageError("--backend oracle requires --models");
      const auto models = load_models(*opt.models_dir);
      std::map<std::string, OracleDetector> detectors;
      for (const auto& t : models.trees) detectors.emplace(t.model_id(), OracleDetector(t, opt.playout));
      for (std::size_t i = 0; i < items.size(); ++i) {
        // Items without a model id (e.g. log variants) need a single-model directory.
        auto it = items[i].model_id.empty() && detectors.size() == 1 ? detectors.begin()
                                                                     : detectors.find(items[i].model_id);
        if (it == detectors.end())
          throw DataError("item '" + items[i].id + "': no model '" + items[i].model_id + "' in " +
                          opt.models_dir->string());
        verdicts[i] = it->second.classify(items[i].trace);
      }
      break;
    }
    case Backend::Pairs: {
      if (!opt.train_normals) throw UsageError("--backend pairs requires --train-normals");
      const auto training = load_items_file(*opt.train_normals);
      std::map<std::string, PairIndex> per_model;
      PairIndex global;
      std::size_t n_normals = 0;
      for (const auto& t : training) {
        if (t.gold && *t.gold != Label::Normal) continue;
        per_model[t.model_id].add(t.trace);
        global.add(t.trace);
        ++n_normals;
      }
      if (n_normals == 0) throw DataError("no normal traces in " + opt.train_normals->string());
      std::map<std::string, PairDetector> detectors;
      for (auto& [id, idx] : per_model) detectors.emplace(id, PairDetector(std::move(idx)));
      const PairDetector fallback(std::move(global));
      for (std::size_t i = 0; i < items.size(); ++i) {
        auto it = detectors.find(items[i].model_id);
        verdicts[i] = (it == detectors.end() ? fallback : it->second).classify(items[i].trace);
      }
      break;
    }
    case Backend::Llm: {
      if (opt.endpoint.base_url.empty()) throw UsageError("--backend llm requires --endpoint");
      const LlmDetector llm(opt.endpoint);
      std::vector<Trace> traces;
      std::vector<std::string> ids;
      for (const auto& it : items) {
        traces.push_back(it.trace);
        ids.push_back(it.id);
      }
      const auto outcomes = llm.classify_all(traces, ids);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].verdict) {
          verdicts[i] = outcomes[i].verdict;
        } else {
          ++sum.failed;
          sum.transport_failure = true;
          log << "error: " << outcomes[i].error << '\n';
        }
      }
      break;
    }
  }

  auto out = open_out(opt.out);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!verdicts[i]) continue;
    sum.n_unparseable += !verdicts[i]->parse_ok;
    out << dump_line(prediction_json(items[i], *verdicts[i])) << '\n';
    ++sum.written;
  }
  log << "wrote " << sum.written << " predictions to " << opt.out.string() << " (n_unparseable=" << sum.n_unparseable;
  if (sum.failed) log << ", failed=" << sum.failed;
  log << ")\n";
  return sum;
}

// ---------------------------------------------------------------------------

inline EvalReport cmd_eval(const fs::path& predictions, const fs::path& gold, const fs::path& report_out,
                           std::ostream& table_out = std::cout) {
  const auto golds = load_items_file(gold);
  std::map<std::string, const TraceItem*> gold_by_id;
  for (const auto& g : golds) {
    if (!g.gold) throw DataError("gold item '" + g.id + "' has no label");
    if (!gold_by_id.emplace(g.id, &g).second) throw DataError("duplicate gold id '" + g.id + "'");
  }

  struct Pred {
    Label label;
    std::optional<std::string> cause;
    bool parse_ok;
  };
  std::map<std::string, Pred> preds;
  {
    std::ifstream in(predictions, std::ios::binary);
    if (!in) throw DataError("cannot read " + predictions.string());
    for_each_json_line(in, [&preds](const nlohmann::json& j, std::size_t) {
      Pred p{label_from_string(j.at("label").get<std::string>()), std::nullopt, j.value("parse_ok", true)};
      if (j.contains("cause") && j.at("cause").is_string()) p.cause = j.at("cause").get<std::string>();
      const auto id = j.at("id").get<std::string>();
      if (!preds.emplace(id, std::move(p)).second) throw DataError("duplicate prediction id '" + id + "'");
    });
  }

  std::vector<std::string> missing, unknown;
  for (const auto& [id, g] : gold_by_id)
    if (!preds.count(id)) missing.push_back(id);
  for (const auto& [id, p] : preds)
    if (!gold_by_id.count(id)) unknown.push_back(id);
  if (!missing.empty() || !unknown.empty()) {
    auto list = [](const std::vector<std::string>& v) {
      std::vector<std::string> head(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(v.size(), 20)));
      return join(head, ", ") + (v.size() > 20 ? ", ..." : "");
    };
    std::string msg = "prediction/gold id mismatch";
    if (!missing.empty()) msg += "; missing predictions (" + std::to_string(missing.size()) + "): " + list(missing);
    if (!unknown.empty()) msg += "; ids not in gold (" + std::to_string(unknown.size()) + "): " + list(unknown);
    throw DataError(msg);
  }

  std::vector<ScoredExample> xs;
  for (const auto& g : golds) {
    const Pred& p = preds.at(g.id);
    xs.push_back({*g.gold, p.label, p.parse_ok, g.gold_cause, p.cause, g.anomaly_type});
  }
  const EvalReport rep = evaluate(xs);
  table_out << format_table(rep);
  auto out = open_out(report_out);
  out << to_json(rep).dump(2) << '\n';
  return rep;
}

// ---------------------------------------------------------------------------

inline std::vector<EventLogVariant> cmd_variants(const fs::path& csv, const fs::path& out_path,
                                                 const EventLogColumns& cols, std::ostream& log = std::cerr) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw DataError("cannot read " + csv.string());
  const auto variants = import_event_log_csv(in, cols);
  auto out = open_out(out_path);
  std::size_t cases = 0;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    nlohmann::ordered_json j;
    std::string num = std::to_string(i);
    j["id"] = "variant-" + std::string(num.size() < 6 ? 6 - num.size() : 0, '0') + num;
    j["trace"] = variants[i].trace;
    j["count"] = variants[i].count;
    out << dump_line(j) << '\n';
    cases += variants[i].count;
  }
  log << cases << " cases, " << variants.size() << " variants\n";
  return variants;
}

// ---------------------------------------------------------------------------

inline int cmd_validate_models(const fs::path& dir, const PlayoutConfig& cfg, std::ostream& out = std::cout) {
  const auto models = load_models(dir);
  for (std::size_t i = 0; i < models.trees.size(); ++i) {
    const auto& t = models.trees[i];
    const auto lang = playout(t, cfg);
    out << "ok      " << models.files[i] << "  nodes=" << t.size() << " exclusive=" << exclusive_nodes(t).size()
        << " traces=" << lang.size() << (lang.truncated() ? " (truncated)" : "") << '\n';
  }
  for (const auto& [file, why] : models.skipped) out << "invalid " << file << "  " << why << '\n';
  return models.skipped.empty() && !models.trees.empty() ? kOk : kDataError;
}

}  // namespace semlog::cli
