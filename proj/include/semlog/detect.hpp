#pragma once

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semlog/anomaly.hpp"
#include "semlog/dataset.hpp"
#include "semlog/playout.hpp"

namespace semlog {

struct Verdict {
  Label label = Label::Anomalous;
  std::optional<std::string> cause;
  bool parse_ok = true;
  std::optional<std::string> raw;

  static Verdict normal() { return {Label::Normal, std::nullopt, true, std::nullopt}; }
  static Verdict anomalous(std::optional<std::string> cause = std::nullopt) {
    return {Label::Anomalous, std::move(cause), true, std::nullopt};
  }
  /// Unparseable backend output counts as an anomalous prediction.
  static Verdict unparseable(std::string raw) { return {Label::Anomalous, std::nullopt, false, std::move(raw)}; }
};

enum class ParsedVerdict { Normal, Anomalous, Unparseable };

/// Case-insensitive keyword scan; whichever of "anomalous"/"deviat" or a
/// standalone "normal" occurs first decides. Negation is not interpreted.
inline ParsedVerdict parse_verdict(std::string_view text) {
  std::string lower(text);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; };

  std::size_t anomalous = std::min(lower.find("anomalous"), lower.find("deviat"));
  std::size_t normal = std::string::npos;
  for (std::size_t p = lower.find("normal"); p != std::string::npos; p = lower.find("normal", p + 1)) {
    const bool left = p == 0 || !word_char(lower[p - 1]);
    const bool right = p + 6 >= lower.size() || !word_char(lower[p + 6]);
    if (left && right) {
      normal = p;
      break;
    }
  }
  if (anomalous == std::string::npos && normal == std::string::npos) return ParsedVerdict::Unparseable;
  return normal < anomalous ? ParsedVerdict::Normal : ParsedVerdict::Anomalous;
}

/// Ground truth: a trace is normal iff the model's language contains it.
class OracleDetector {
 public:
  explicit OracleDetector(const ProcessTree& tree, const PlayoutConfig& cfg = {}) : language_(tree, cfg) {}

  Verdict classify(const Trace& trace) const {
    return language_.accepts(trace) ? Verdict::normal() : Verdict::anomalous();
  }

 private:
  Membership language_;
};

/// Eventually-follows pairs observed in normal traces.
struct PairIndex {
  std::set<std::pair<std::string, std::string>> pairs;
  std::set<std::string> vocab;

  void add(const Trace& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      vocab.insert(t[i]);
      for (std::size_t j = i + 1; j < t.size(); ++j) pairs.emplace(t[i], t[j]);
    }
  }
};

template <typename Range>
PairIndex train_pair_index(const Range& normal_traces) {
  PairIndex idx;
  for (const Trace& t : normal_traces) idx.add(t);
  return idx;
}

/// Flags a trace as soon as one of its eventually-follows pairs was never
/// seen in training.
class PairDetector {
 public:
  explicit PairDetector(PairIndex index) : index_(std::move(index)) {}

  Verdict classify(const Trace& t) const {
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = i + 1; j < t.size(); ++j)
        if (!index_.pairs.count({t[i], t[j]}))
          return Verdict::anomalous("The event pair ('" + t[i] + "', '" + t[j] + "') is anomalous.");
    return Verdict::normal();
  }

  const PairIndex& index() const noexcept { return index_; }

 private:
  PairIndex index_;
};

}  // namespace semlog
