#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "semlog/anomaly.hpp"
#include "semlog/dataset.hpp"
#include "semlog/playout.hpp"
#include "semlog/process_tree.hpp"

namespace semlog {

struct SplitConfig {
  std::uint64_t seed = 0;
  /// Models held out entirely for D1.
  std::size_t n_holdout = 1;
  /// Training models re-sampled with fresh anomalies for D2.
  std::size_t n_d2_models = 1;
  PlayoutConfig playout;
  std::size_t jobs = 1;
};

struct SplitBundle {
  std::vector<QAExample> train, d1, d2;
  std::vector<AnomalyRecord> train_anomalies, d1_anomalies, d2_anomalies;
  nlohmann::ordered_json manifest;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Draws `target` anomalies for one model. Each slot picks one of the five
/// ordering types or exclusion (when the model has exclusion anomalies)
/// uniformly; exclusion slots are filled from the precomputed pool.
/// Traces in `forbidden` are never returned.
inline std::vector<AnomalyRecord> simulate_anomalies(const ProcessTree& tree, const TraceSet& normals,
                                                     const std::vector<AnomalyRecord>& exclusion_pool,
                                                     const Vocabulary& vocab, Rng& rng, std::size_t target,
                                                     const PlayoutConfig& cfg,
                                                     const std::unordered_set<Trace, TraceHash>& forbidden = {}) {
  const std::size_t n_types = exclusion_pool.empty() ? 5 : 6;
  std::size_t want_exclusion = 0;
  for (std::size_t i = 0; i < target; ++i)
    if (rng.uniform(0, n_types - 1) == 5) ++want_exclusion;

  std::vector<AnomalyRecord> out;
  std::unordered_set<Trace, TraceHash> used;
  std::vector<std::size_t> order(exclusion_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t idx : order) {
    if (out.size() >= want_exclusion) break;
    const auto& rec = exclusion_pool[idx];
    if (forbidden.count(rec.trace)) continue;
    used.insert(rec.trace);
    out.push_back(rec);
  }

  const std::size_t want_ordering = target - out.size();
  // Oversample so that filtering against `forbidden` still leaves enough.
  const std::size_t ask = forbidden.empty() ? want_ordering : 2 * want_ordering;
  auto ordering = gen_ordering_anomalies(normals, tree, vocab, rng, ask, cfg);
  std::size_t taken = 0;
  for (auto& rec : ordering) {
    if (taken >= want_ordering) break;
    if (forbidden.count(rec.trace) || used.count(rec.trace)) continue;
    used.insert(rec.trace);
    out.push_back(std::move(rec));
    ++taken;
  }
  return out;
}

namespace detail {

inline nlohmann::ordered_json type_counts(const std::vector<AnomalyRecord>& recs) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto t : kAllAnomalyTypes) j[std::string(to_string(t))] = 0;
  for (const auto& r : recs) j[std::string(to_string(r.type))] = j[std::string(to_string(r.type))].get<int>() + 1;
  return j;
}

inline void append_examples(std::vector<QAExample>& dst, const TraceSet& normals, const std::vector<AnomalyRecord>& anomalies,
                            const std::string& model_id) {
  for (const auto& t : normals) {
    QAExample ex = build_qa(t, Label::Normal);
    ex.model_id = model_id;
    dst.push_back(std::move(ex));
  }
  for (const auto& r : anomalies) dst.push_back(build_qa(r));
}

inline void assign_ids(std::vector<QAExample>& xs, const std::string& prefix) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::string num = std::to_string(i);
    xs[i].id = prefix + "-" + std::string(num.size() < 6 ? 6 - num.size() : 0, '0') + num;
  }
}

inline nlohmann::ordered_json split_counts(const std::vector<QAExample>& xs) {
  std::size_t normal = 0;
  for (const auto& x : xs) normal += x.label == Label::Normal;
  return {{"examples", xs.size()}, {"normal", normal}, {"anomalous", xs.size() - normal}};
}

}  // namespace detail

/// Throws ModelError when D1 shares a model with train/D2, or when a D2
/// anomalous trace repeats a training anomalous trace of the same model.
inline void check_split_hygiene(const SplitBundle& b) {
  std::set<std::string> train_models, d2_models;
  for (const auto& x : b.train) train_models.insert(x.model_id);
  for (const auto& x : b.d2) d2_models.insert(x.model_id);
  for (const auto& x : b.d1)
    if (train_models.count(x.model_id) || d2_models.count(x.model_id))
      throw ModelError("split hygiene: D1 model '" + x.model_id + "' also appears in train/D2");
  std::map<std::string, std::unordered_set<Trace, TraceHash>> train_anom;
  for (const auto& x : b.train)
    if (x.label == Label::Anomalous) train_anom[x.model_id].insert(x.trace);
  for (const auto& x : b.d2) {
    if (x.label != Label::Anomalous) continue;
    auto it = train_anom.find(x.model_id);
    if (it != train_anom.end() && it->second.count(x.trace))
      throw ModelError("split hygiene: D2 anomaly <" + format_trace(x.trace) + "> of model '" + x.model_id +
                       "' also occurs in training");
  }
}

/// Builds the training set, D1 (held-out models) and D2 (training models with
/// anomalies drawn from a disjoint seed). Every model contributes its normal
/// traces and about as many anomalies.
inline SplitBundle build_splits(std::vector<ProcessTree> corpus, const SplitConfig& cfg) {
  cfg.playout.validate();
  if (corpus.size() <= cfg.n_holdout)
    throw std::invalid_argument("corpus of " + std::to_string(corpus.size()) + " models is too small for " +
                                std::to_string(cfg.n_holdout) + " held-out models");
  std::sort(corpus.begin(), corpus.end(),
            [](const ProcessTree& a, const ProcessTree& b) { return a.model_id() < b.model_id(); });
  for (std::size_t i = 1; i < corpus.size(); ++i)
    if (corpus[i].model_id() == corpus[i - 1].model_id())
      throw std::invalid_argument("duplicate model id '" + corpus[i].model_id() + "'");

  const Vocabulary vocab = vocabulary(corpus);
  const std::uint64_t split_seed = derive_seed(cfg.seed, "split");
  const std::uint64_t d2_pick_seed = derive_seed(cfg.seed, "d2-models");

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(split_seed);
  split_rng.shuffle(order);
  std::vector<bool> holdout(corpus.size(), false);
  for (std::size_t i = 0; i < cfg.n_holdout; ++i) holdout[order[i]] = true;

  std::vector<std::size_t> training;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (!holdout[i]) training.push_back(i);
  std::vector<std::size_t> d2_pick = training;
  Rng d2_rng(d2_pick_seed);
  d2_rng.shuffle(d2_pick);
  d2_pick.resize(std::min(cfg.n_d2_models, d2_pick.size()));
  std::vector<bool> in_d2(corpus.size(), false);
  for (auto i : d2_pick) in_d2[i] = true;

  struct PerModel {
    TraceSet normals;
    std::vector<AnomalyRecord> primary;  // train or d1 anomalies
    std::vector<AnomalyRecord> d2;
    std::uint64_t primary_seed = 0, d2_seed = 0;
    std::size_t exclusion_pool = 0;
  };
  std::vector<PerModel> results(corpus.size());

  parallel_for(corpus.size(), cfg.jobs, [&](std::size_t i) {
    const ProcessTree& tree = corpus[i];
    PerModel& r = results[i];
    r.normals = playout(tree, cfg.playout);
    const auto pool = gen_exclusion_anomalies(tree, r.normals, cfg.playout);
    r.exclusion_pool = pool.size();
    const std::string stream = (holdout[i] ? "d1/" : "train/") + tree.model_id();
    r.primary_seed = derive_seed(cfg.seed, stream);
    Rng rng(r.primary_seed);
    r.primary = simulate_anomalies(tree, r.normals, pool, vocab, rng, r.normals.size(), cfg.playout);
    if (in_d2[i]) {
      std::unordered_set<Trace, TraceHash> seen_in_training;
      for (const auto& rec : r.primary) seen_in_training.insert(rec.trace);
      r.d2_seed = derive_seed(cfg.seed, "d2/" + tree.model_id());
      Rng rng2(r.d2_seed);
      r.d2 = simulate_anomalies(tree, r.normals, pool, vocab, rng2, r.normals.size(), cfg.playout, seen_in_training);
    }
  });

  SplitBundle b;
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::string& id = corpus[i].model_id();
    PerModel& r = results[i];
    nlohmann::ordered_json m;
    m["model_id"] = id;
    m["split"] = holdout[i] ? "d1" : "train";
    m["in_d2"] = static_cast<bool>(in_d2[i]);
    m["normal_traces"] = r.normals.size();
    m["truncated"] = r.normals.truncated();
    m["exclusive_nodes"] = exclusive_nodes(corpus[i]).size();
    m["exclusion_pool"] = r.exclusion_pool;
    m["seed"] = r.primary_seed;
    m["anomalies"] = detail::type_counts(r.primary);
    if (in_d2[i]) {
      m["d2_seed"] = r.d2_seed;
      m["d2_anomalies"] = detail::type_counts(r.d2);
    }
    models.push_back(std::move(m));

    if (holdout[i]) {
      detail::append_examples(b.d1, r.normals, r.primary, id);
      b.d1_anomalies.insert(b.d1_anomalies.end(), r.primary.begin(), r.primary.end());
    } else {
      detail::append_examples(b.train, r.normals, r.primary, id);
      b.train_anomalies.insert(b.train_anomalies.end(), r.primary.begin(), r.primary.end());
      if (in_d2[i]) {
        detail::append_examples(b.d2, r.normals, r.d2, id);
        b.d2_anomalies.insert(b.d2_anomalies.end(), r.d2.begin(), r.d2.end());
      }
    }
  }
  detail::assign_ids(b.train, "train");
  detail::assign_ids(b.d1, "d1");
  detail::assign_ids(b.d2, "d2");

  auto& man = b.manifest;
  man["seed"] = cfg.seed;
  man["seeds"] = {{"split", split_seed}, {"d2_models", d2_pick_seed}};
  man["config"] = {{"max_loop_iterations", cfg.playout.max_loop_iterations},
                   {"max_traces", cfg.playout.max_traces},
                   {"holdout", cfg.n_holdout},
                   {"d2_models", d2_pick.size()}};
  man["counts"] = {{"train", detail::split_counts(b.train)},
                   {"d1", detail::split_counts(b.d1)},
                   {"d2", detail::split_counts(b.d2)}};
  man["vocabulary_size"] = vocab.size();
  man["models"] = std::move(models);

  check_split_hygiene(b);
  return b;
}

}  // namespace semlog
