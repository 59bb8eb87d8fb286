#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "semlog/common.hpp"
#include "semlog/playout.hpp"
#include "semlog/process_tree.hpp"

namespace semlog {

enum class AnomalyType { Skip, Insert, Rework, Early, Late, Exclusion };

inline constexpr std::array<AnomalyType, 5> kOrderingTypes{AnomalyType::Skip, AnomalyType::Insert,
                                                           AnomalyType::Rework, AnomalyType::Early,
                                                           AnomalyType::Late};

inline constexpr std::array<AnomalyType, 6> kAllAnomalyTypes{AnomalyType::Skip,  AnomalyType::Insert,
                                                             AnomalyType::Rework, AnomalyType::Early,
                                                             AnomalyType::Late,  AnomalyType::Exclusion};

inline std::string_view to_string(AnomalyType t) {
  switch (t) {
    case AnomalyType::Skip: return "skip";
    case AnomalyType::Insert: return "insert";
    case AnomalyType::Rework: return "rework";
    case AnomalyType::Early: return "early";
    case AnomalyType::Late: return "late";
    case AnomalyType::Exclusion: return "exclusion";
  }
  return "unknown";
}

inline AnomalyType anomaly_type_from_string(std::string_view s) {
  for (auto t : kAllAnomalyTypes)
    if (to_string(t) == s) return t;
  throw DataError("unknown anomaly type '" + std::string(s) + "'");
}

/// Where and what was injected. Indices are 1-based positions in the source
/// (normal) trace.
///
///   skip:      e_first..e_last removed; anchor = e_{last+1}
///   insert:    `segment` inserted after e_position (0 = at the front)
///   rework:    e_first..e_last repeated after e_position; anchor = e_position
///   early:     e_first..e_last moved before e_position; anchor = e_{first-1}
///   late:      e_first..e_last moved after e_position; anchor = e_{last+1}
///   exclusion: segment = first nonempty branch set, others = union of the
///              remaining ones, node_id = the swapped exclusive node
struct AnomalyMeta {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t position = 0;
  std::vector<std::string> segment;
  std::optional<std::string> anchor;
  std::vector<std::string> others;
  std::optional<int> node_id;

  friend bool operator==(const AnomalyMeta&, const AnomalyMeta&) = default;
};

struct OrderingCandidate {
  Trace trace;
  AnomalyType type;
  AnomalyMeta meta;
};

struct AnomalyRecord {
  Trace trace;
  AnomalyType type;
  std::string cause;
  std::string source_model_id;
  AnomalyMeta meta;

  friend bool operator==(const AnomalyRecord&, const AnomalyRecord&) = default;
};

/// 'A', 'B', 'C' and 'D'
inline std::string format_activity_list(const std::vector<std::string>& labels) {
  if (labels.empty()) throw std::invalid_argument("format_activity_list: empty list");
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += (i + 1 == labels.size()) ? " and " : ", ";
    out += '\'';
    out += labels[i];
    out += '\'';
  }
  return out;
}

namespace detail {

inline std::string subject(const std::vector<std::string>& labels) {
  return (labels.size() == 1 ? "The activity " : "The activities ") + format_activity_list(labels);
}

inline const char* verb(const std::vector<std::string>& labels) { return labels.size() == 1 ? " is" : " are"; }
inline const char* pronoun(const std::vector<std::string>& labels) { return labels.size() == 1 ? "it" : "they"; }

inline const std::string& require_anchor(const AnomalyMeta& meta, AnomalyType type) {
  if (!meta.anchor || meta.anchor->empty())
    throw std::invalid_argument("render_cause: " + std::string(to_string(type)) + " requires an anchor activity");
  return *meta.anchor;
}

}  // namespace detail

inline std::string render_cause(AnomalyType type, const AnomalyMeta& meta) {
  using namespace detail;
  const auto& seg = meta.segment;
  if (seg.empty()) throw std::invalid_argument("render_cause: empty activity segment");
  switch (type) {
    case AnomalyType::Skip:
      return subject(seg) + verb(seg) + " skipped before '" + require_anchor(meta, type) + "'.";
    case AnomalyType::Insert:
      return subject(seg) + " should not be executed.";
    case AnomalyType::Rework:
      return subject(seg) + verb(seg) + " reworked after '" + require_anchor(meta, type) + "'.";
    case AnomalyType::Early:
      return subject(seg) + verb(seg) + " executed too early, " + pronoun(seg) + " should be executed after '" +
             require_anchor(meta, type) + "'.";
    case AnomalyType::Late:
      return subject(seg) + verb(seg) + " executed too late, " + pronoun(seg) + " should be executed before '" +
             require_anchor(meta, type) + "'.";
    case AnomalyType::Exclusion: {
      if (meta.others.empty()) throw std::invalid_argument("render_cause: exclusion requires a second activity set");
      const std::string rest = (meta.others.size() == 1 ? "the activity " : "the activities ") +
                               format_activity_list(meta.others);
      return subject(seg) + verb(seg) + " mutually exclusive with " + rest +
             ", meaning they should not be executed within the same process instance.";
    }
  }
  throw std::invalid_argument("render_cause: unknown anomaly type");
}

/// Applies an ordering anomaly at fixed positions (see AnomalyMeta); fills in
/// the segment and anchor. For insert, `meta.segment` holds the new activities.
/// Throws std::out_of_range on positions the trace cannot support.
inline OrderingCandidate apply_ordering(const Trace& trace, AnomalyType type, AnomalyMeta meta) {
  const std::size_t n = trace.size();
  auto bad = [&] {
    return std::out_of_range("apply_ordering: " + std::string(to_string(type)) + " positions out of range");
  };
  auto slice = [&trace](std::size_t first, std::size_t last) {
    return std::vector<std::string>(trace.begin() + static_cast<std::ptrdiff_t>(first - 1),
                                    trace.begin() + static_cast<std::ptrdiff_t>(last));
  };
  const bool has_segment = meta.first >= 1 && meta.first <= meta.last && meta.last <= n;

  OrderingCandidate c{{}, type, std::move(meta)};
  AnomalyMeta& m = c.meta;
  switch (type) {
    case AnomalyType::Skip:
      if (!has_segment || m.last >= n) throw bad();
      m.segment = slice(m.first, m.last);
      m.anchor = trace[m.last];
      c.trace.assign(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(m.first - 1));
      for (std::size_t p = m.last + 1; p <= n; ++p) c.trace.push_back(trace[p - 1]);
      return c;
    case AnomalyType::Insert:
      if (m.segment.empty() || m.position > n) throw bad();
      m.first = m.last = 0;
      m.anchor.reset();
      c.trace.assign(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(m.position));
      c.trace.insert(c.trace.end(), m.segment.begin(), m.segment.end());
      c.trace.insert(c.trace.end(), trace.begin() + static_cast<std::ptrdiff_t>(m.position), trace.end());
      return c;
    case AnomalyType::Rework:
      if (!has_segment || m.position < m.last || m.position > n) throw bad();
      m.segment = slice(m.first, m.last);
      m.anchor = trace[m.position - 1];
      c.trace.assign(trace.begin(), trace.begin() + static_cast<std::ptrdiff_t>(m.position));
      c.trace.insert(c.trace.end(), m.segment.begin(), m.segment.end());
      c.trace.insert(c.trace.end(), trace.begin() + static_cast<std::ptrdiff_t>(m.position), trace.end());
      return c;
    case AnomalyType::Early:
      if (!has_segment || m.first < 2 || m.position < 1 || m.position >= m.first) throw bad();
      m.segment = slice(m.first, m.last);
      m.anchor = trace[m.first - 2];
      for (std::size_t p = 1; p < m.position; ++p) c.trace.push_back(trace[p - 1]);
      c.trace.insert(c.trace.end(), m.segment.begin(), m.segment.end());
      for (std::size_t p = m.position; p <= n; ++p)
        if (p < m.first || p > m.last) c.trace.push_back(trace[p - 1]);
      return c;
    case AnomalyType::Late:
      if (!has_segment || m.last >= n || m.position <= m.last || m.position > n) throw bad();
      m.segment = slice(m.first, m.last);
      m.anchor = trace[m.last];
      for (std::size_t p = 1; p <= m.position; ++p)
        if (p < m.first || p > m.last) c.trace.push_back(trace[p - 1]);
      c.trace.insert(c.trace.end(), m.segment.begin(), m.segment.end());
      for (std::size_t p = m.position + 1; p <= n; ++p) c.trace.push_back(trace[p - 1]);
      return c;
    case AnomalyType::Exclusion:
      break;
  }
  throw std::invalid_argument("apply_ordering: " + std::string(to_string(type)) + " is not an ordering anomaly");
}

/// Samples an ordering anomaly for a normal trace. The segment length is drawn
/// from {1, 2, 3} and clipped to what the trace allows; returns nullopt when no
/// feasible injection exists.
inline std::optional<OrderingCandidate> inject_ordering(const Trace& trace, AnomalyType type,
                                                        const Vocabulary& vocab, Rng& rng) {
  if (type == AnomalyType::Exclusion)
    throw std::invalid_argument("inject_ordering: exclusion is not an ordering anomaly");
  const std::size_t n = trace.size();
  const std::size_t want = rng.uniform(1, 3);
  AnomalyMeta m;
  switch (type) {
    case AnomalyType::Skip: {
      if (n < 2) return std::nullopt;
      const std::size_t len = std::min(want, n - 1);
      m.first = rng.uniform(1, n - len);
      m.last = m.first + len - 1;
      break;
    }
    case AnomalyType::Insert:
      if (vocab.empty() || n == 0) return std::nullopt;
      for (std::size_t i = 0; i < want; ++i) m.segment.push_back(rng.pick(vocab.labels));
      m.position = rng.uniform(0, n);
      break;
    case AnomalyType::Rework: {
      if (n < 1) return std::nullopt;
      const std::size_t len = std::min(want, n);
      m.first = rng.uniform(1, n - len + 1);
      m.last = m.first + len - 1;
      m.position = rng.uniform(m.last, n);
      break;
    }
    case AnomalyType::Early: {
      if (n < 2) return std::nullopt;
      const std::size_t len = std::min(want, n - 1);
      m.first = rng.uniform(2, n - len + 1);
      m.last = m.first + len - 1;
      m.position = rng.uniform(1, m.first - 1);
      break;
    }
    case AnomalyType::Late: {
      if (n < 2) return std::nullopt;
      const std::size_t len = std::min(want, n - 1);
      m.first = rng.uniform(1, n - len);
      m.last = m.first + len - 1;
      m.position = rng.uniform(m.last + 1, n);
      break;
    }
    case AnomalyType::Exclusion:
      break;
  }
  return apply_ordering(trace, type, std::move(m));
}

/// Builds a record and checks that its trace lies outside the source model's
/// language.
inline AnomalyRecord make_record(Trace trace, AnomalyType type, AnomalyMeta meta, const ProcessTree& source,
                                 const Membership& language) {
  if (language.accepts(trace))
    throw ModelError("anomalous trace <" + format_trace(trace) + "> is allowed by model '" + source.model_id() + "'");
  std::string cause = render_cause(type, meta);
  return AnomalyRecord{std::move(trace), type, std::move(cause), source.model_id(), std::move(meta)};
}

/// Samples (normal trace, ordering type) pairs and keeps injected traces that
/// are outside the model's language and not already kept. Gives up after
/// 10 * target attempts.
inline std::vector<AnomalyRecord> gen_ordering_anomalies(const TraceSet& normals, const ProcessTree& tree,
                                                         const Vocabulary& vocab, Rng& rng, std::size_t target,
                                                         const PlayoutConfig& cfg = {},
                                                         std::span<const AnomalyType> types = kOrderingTypes) {
  std::vector<AnomalyRecord> kept;
  if (normals.empty() || target == 0 || types.empty()) return kept;
  const Membership language(tree, cfg);
  std::unordered_set<Trace, TraceHash> seen;
  const std::size_t attempts = 10 * target;
  for (std::size_t a = 0; a < attempts && kept.size() < target; ++a) {
    const Trace& base = normals[rng.uniform(0, normals.size() - 1)];
    const AnomalyType type = types[rng.uniform(0, types.size() - 1)];
    auto cand = inject_ordering(base, type, vocab, rng);
    if (!cand || cand->trace.empty()) continue;
    if (seen.count(cand->trace) || normals.contains(cand->trace) || language.accepts(cand->trace)) continue;
    seen.insert(cand->trace);
    kept.push_back(make_record(std::move(cand->trace), cand->type, std::move(cand->meta), tree, language));
  }
  return kept;
}

/// m': the same tree with exclusive node `node_id` turned into a parallel one.
inline ProcessTree swap_exclusive_to_parallel(const ProcessTree& tree, int node_id) {
  const Node* n = tree.find(node_id);
  if (!n) throw ModelError("node " + std::to_string(node_id) + " does not exist");
  if (n->kind != NodeKind::Exclusive) throw ModelError("node " + std::to_string(node_id) + " is not exclusive");
  return tree.with_kind(node_id, NodeKind::Parallel);
}

/// Activity sets of the branches of an exclusive node, in branch order. Labels
/// that occur under more than one branch are removed from every set.
inline std::vector<std::vector<std::string>> exclusive_branch_sets(const ProcessTree& tree, int node_id) {
  const Node* n = tree.find(node_id);
  if (!n || n->kind != NodeKind::Exclusive) throw ModelError("node " + std::to_string(node_id) + " is not exclusive");
  std::vector<std::vector<std::string>> sets;
  std::map<std::string, int> occurrences;
  for (const auto& c : n->children) {
    sets.push_back(labels_in_order(c));
    for (const auto& l : sets.back()) ++occurrences[l];
  }
  for (auto& s : sets)
    s.erase(std::remove_if(s.begin(), s.end(), [&](const std::string& l) { return occurrences[l] > 1; }), s.end());
  return sets;
}

/// Swaps each exclusive node to parallel in turn, plays the modified model
/// out and keeps the traces outside the original language that execute
/// activities of at least two branches.
inline std::vector<AnomalyRecord> gen_exclusion_anomalies(const ProcessTree& tree, const TraceSet& normals,
                                                          const PlayoutConfig& cfg = {}) {
  std::vector<AnomalyRecord> out;
  const auto nodes = exclusive_nodes(tree);
  if (nodes.empty()) return out;
  const Membership language(tree, cfg);
  std::unordered_set<Trace, TraceHash> seen;
  for (int id : nodes) {
    const ProcessTree modified = swap_exclusive_to_parallel(tree, id);
    const auto branch_sets = exclusive_branch_sets(tree, id);
    const TraceSet candidates = playout(modified, cfg);
    for (const Trace& t : candidates) {
      if (seen.count(t) || normals.contains(t) || language.accepts(t)) continue;
      const std::set<std::string> present(t.begin(), t.end());
      std::vector<std::vector<std::string>> filtered;
      for (const auto& s : branch_sets) {
        std::vector<std::string> f;
        for (const auto& l : s)
          if (present.count(l)) f.push_back(l);
        if (!f.empty()) filtered.push_back(std::move(f));
      }
      if (filtered.size() < 2) continue;
      AnomalyMeta meta;
      meta.node_id = id;
      meta.segment = filtered.front();
      for (std::size_t i = 1; i < filtered.size(); ++i)
        for (const auto& l : filtered[i])
          if (std::find(meta.others.begin(), meta.others.end(), l) == meta.others.end()) meta.others.push_back(l);
      seen.insert(t);
      out.push_back(make_record(t, AnomalyType::Exclusion, std::move(meta), tree, language));
    }
  }
  return out;
}

}  // namespace semlog
