#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "semlog/dataset.hpp"

namespace semlog {

// Anomalous is the positive class.
struct ClassificationMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  bool precision_defined = false;
  bool recall_defined = false;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

inline ClassificationMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  ClassificationMetrics m{tp, fp, tn, fn};
  m.precision_defined = tp + fp > 0;
  m.recall_defined = tp + fn > 0;
  m.precision = m.precision_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = m.recall_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  const std::size_t total = tp + fp + tn + fn;
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  return m;
}

inline ClassificationMetrics classification_metrics(std::span<const Label> predictions, std::span<const Label> golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("classification_metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(golds.size()) + " gold labels");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const bool p = predictions[i] == Label::Anomalous;
    const bool g = golds[i] == Label::Anomalous;
    tp += p && g;
    fp += p && !g;
    tn += !p && !g;
    fn += !p && g;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

/// Lowercases and splits on every non-alphanumeric byte.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct RougeScore {
  double p = 0, r = 0, f = 0;
  bool degenerate = false;
};

namespace detail {
inline double harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }
}  // namespace detail

/// Clipped bigram overlap.
inline RougeScore rouge2(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  if (c.size() < 2 || r.size() < 2) return {0, 0, 0, true};
  std::map<std::pair<std::string_view, std::string_view>, std::size_t> ref_counts;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) ++ref_counts[{r[i], r[i + 1]}];
  std::size_t match = 0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    auto it = ref_counts.find({c[i], c[i + 1]});
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++match;
    }
  }
  RougeScore s;
  s.p = static_cast<double>(match) / static_cast<double>(c.size() - 1);
  s.r = static_cast<double>(match) / static_cast<double>(r.size() - 1);
  s.f = detail::harmonic(s.p, s.r);
  return s;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// LCS-based; F is the plain harmonic mean (beta = 1).
inline RougeScore rougeL(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  if (c.empty() || r.empty()) return {0, 0, 0, true};
  const double l = static_cast<double>(lcs_length(c, r));
  RougeScore s;
  s.p = l / static_cast<double>(c.size());
  s.r = l / static_cast<double>(r.size());
  s.f = detail::harmonic(s.p, s.r);
  return s;
}

struct EvalReport {
  ClassificationMetrics classification;
  RougeScore rouge2;
  RougeScore rougeL;
  std::size_t n_rouge = 0;  // examples that contributed ROUGE scores
  std::size_t n_unparseable = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> detected_by_type;  // type -> (flagged, total)
};

struct ScoredExample {
  Label gold;
  Label predicted;
  bool parse_ok = true;
  std::optional<std::string> gold_cause;
  std::optional<std::string> predicted_cause;
  std::optional<AnomalyType> anomaly_type;
};

/// Classification over all examples; ROUGE averaged over correctly flagged
/// anomalies that carry a reference cause (a missing predicted cause scores 0).
inline EvalReport evaluate(const std::vector<ScoredExample>& xs) {
  EvalReport rep;
  std::vector<Label> preds, golds;
  for (const auto& x : xs) {
    preds.push_back(x.predicted);
    golds.push_back(x.gold);
    rep.n_unparseable += !x.parse_ok;
    if (x.gold == Label::Anomalous && x.anomaly_type) {
      auto& slot = rep.detected_by_type[std::string(to_string(*x.anomaly_type))];
      slot.first += x.predicted == Label::Anomalous;
      ++slot.second;
    }
    if (x.gold == Label::Anomalous && x.predicted == Label::Anomalous && x.gold_cause) {
      const std::string cand = x.predicted_cause.value_or("");
      const auto r2 = rouge2(cand, *x.gold_cause);
      const auto rl = rougeL(cand, *x.gold_cause);
      rep.rouge2.p += r2.p, rep.rouge2.r += r2.r, rep.rouge2.f += r2.f;
      rep.rougeL.p += rl.p, rep.rougeL.r += rl.r, rep.rougeL.f += rl.f;
      ++rep.n_rouge;
    }
  }
  rep.classification = classification_metrics(preds, golds);
  if (rep.n_rouge) {
    const double n = static_cast<double>(rep.n_rouge);
    for (RougeScore* s : {&rep.rouge2, &rep.rougeL}) {
      s->p /= n;
      s->r /= n;
      s->f /= n;
    }
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const EvalReport& rep) {
  const auto& c = rep.classification;
  nlohmann::ordered_json j;
  j["total"] = c.total();
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  j["precision"] = c.precision;
  j["recall"] = c.recall;
  j["f1"] = c.f1;
  j["accuracy"] = c.accuracy;
  j["precision_defined"] = c.precision_defined;
  j["recall_defined"] = c.recall_defined;
  j["n_unparseable"] = rep.n_unparseable;
  j["n_rouge"] = rep.n_rouge;
  j["rouge2"] = {{"p", rep.rouge2.p}, {"r", rep.rouge2.r}, {"f", rep.rouge2.f}};
  j["rougeL"] = {{"p", rep.rougeL.p}, {"r", rep.rougeL.r}, {"f", rep.rougeL.f}};
  auto& by_type = j["detected_by_type"] = nlohmann::ordered_json::object();
  for (const auto& [type, counts] : rep.detected_by_type)
    by_type[type] = {{"flagged", counts.first}, {"total", counts.second}};
  return j;
}

inline std::string format_table(const EvalReport& rep) {
  const auto& c = rep.classification;
  std::ostringstream os;
  char buf[128];
  auto row = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-16s %12s\n", name, value.c_str());
    os << buf;
  };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", v);
    return std::string(b);
  };
  row("examples", std::to_string(c.total()));
  row("tp / fp", std::to_string(c.tp) + " / " + std::to_string(c.fp));
  row("tn / fn", std::to_string(c.tn) + " / " + std::to_string(c.fn));
  row("precision", num(c.precision) + (c.precision_defined ? "" : "*"));
  row("recall", num(c.recall) + (c.recall_defined ? "" : "*"));
  row("f1", num(c.f1));
  row("accuracy", num(c.accuracy));
  row("unparseable", std::to_string(rep.n_unparseable));
  os << '\n';
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s   (n=%zu)\n", "rouge", "p", "r", "f", rep.n_rouge);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %8.4f\n", "rouge-2", rep.rouge2.p, rep.rouge2.r, rep.rouge2.f);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %8.4f\n", "rouge-L", rep.rougeL.p, rep.rougeL.r, rep.rougeL.f);
  os << buf;
  if (!rep.detected_by_type.empty()) {
    os << '\n';
    for (const auto& [type, counts] : rep.detected_by_type) {
      std::snprintf(buf, sizeof buf, "%-16s %5zu / %-5zu flagged\n", type.c_str(), counts.first, counts.second);
      os << buf;
    }
  }
  if (!c.precision_defined || !c.recall_defined) os << "\n* undefined (zero denominator), reported as 0\n";
  return os.str();
}

}  // namespace semlog
