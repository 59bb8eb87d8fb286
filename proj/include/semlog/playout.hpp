#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <boost/container_hash/hash.hpp>

#include "semlog/common.hpp"
#include "semlog/process_tree.hpp"

namespace semlog {

struct PlayoutConfig {
  /// Upper bound on executions of a loop's do-part.
  std::size_t max_loop_iterations = 2;
  std::size_t max_traces = 5000;

  void validate() const {
    if (max_loop_iterations < 1) throw std::invalid_argument("max_loop_iterations must be >= 1");
    if (max_traces < 1) throw std::invalid_argument("max_traces must be >= 1");
  }
};

struct TraceHash {
  std::size_t operator()(const Trace& t) const { return boost::hash_range(t.begin(), t.end()); }
};

/// Duplicate-free set of traces that remembers insertion order, so iteration
/// is deterministic.
class TraceSet {
 public:
  bool insert(Trace t) {
    if (index_.count(t)) return false;
    index_.insert(t);
    traces_.push_back(std::move(t));
    return true;
  }

  bool contains(const Trace& t) const { return index_.count(t) != 0; }
  std::size_t size() const noexcept { return traces_.size(); }
  bool empty() const noexcept { return traces_.empty(); }
  bool truncated() const noexcept { return truncated_; }
  void set_truncated(bool v) noexcept { truncated_ = v; }

  const std::vector<Trace>& traces() const noexcept { return traces_; }
  auto begin() const { return traces_.begin(); }
  auto end() const { return traces_.end(); }
  const Trace& operator[](std::size_t i) const { return traces_[i]; }

 private:
  std::vector<Trace> traces_;
  std::unordered_set<Trace, TraceHash> index_;
  bool truncated_ = false;
};

/// One trace per line, events joined by ", ".
inline std::string format_trace(const Trace& t) { return join(t, ", "); }

namespace detail::play {

using Word = std::vector<int>;

struct WordHash {
  std::size_t operator()(const Word& w) const { return boost::hash_range(w.begin(), w.end()); }
};

// A capped, order-preserving word set.
class Lang {
 public:
  explicit Lang(std::size_t cap) : cap_(cap) {}

  // Returns false once the cap is reached and the word was new.
  bool add(const Word& w) {
    if (seen_.count(w)) return true;
    if (words_.size() >= cap_) {
      truncated_ = true;
      return false;
    }
    seen_.insert(w);
    words_.push_back(w);
    return true;
  }

  bool full() const { return words_.size() >= cap_; }
  const std::vector<Word>& words() const { return words_; }
  bool truncated() const { return truncated_; }
  void mark_truncated(bool t) { truncated_ = truncated_ || t; }

 private:
  std::size_t cap_;
  std::vector<Word> words_;
  std::unordered_set<Word, WordHash> seen_;
  bool truncated_ = false;
};

class Enumerator {
 public:
  Enumerator(const PlayoutConfig& cfg, std::vector<std::string>& symbols)
      : cfg_(cfg), cap_(cfg.max_traces == std::numeric_limits<std::size_t>::max() ? cfg.max_traces : cfg.max_traces + 1),
        symbols_(symbols) {}

  Lang run(const Node& n) {
    switch (n.kind) {
      case NodeKind::Activity: {
        Lang l(cap_);
        l.add({intern(n.label)});
        return l;
      }
      case NodeKind::Silent: {
        Lang l(cap_);
        l.add({});
        return l;
      }
      case NodeKind::Sequence: {
        Lang acc = run(n.children.front());
        for (std::size_t i = 1; i < n.children.size(); ++i) acc = concat(acc, run(n.children[i]));
        return acc;
      }
      case NodeKind::Exclusive: {
        Lang out(cap_);
        for (const auto& c : n.children) {
          Lang l = run(c);
          out.mark_truncated(l.truncated());
          for (const auto& w : l.words())
            if (!out.add(w)) return out;
        }
        return out;
      }
      case NodeKind::Parallel: {
        Lang acc = run(n.children.front());
        for (std::size_t i = 1; i < n.children.size(); ++i) acc = shuffle(acc, run(n.children[i]));
        return acc;
      }
      case NodeKind::Loop: {
        const Lang body = run(n.children[0]);
        const Lang redo = run(n.children[1]);
        Lang out(cap_);
        out.mark_truncated(body.truncated() || redo.truncated());
        Lang iter = copy(body);
        for (std::size_t k = 0;; ++k) {
          out.mark_truncated(iter.truncated());
          for (const auto& w : iter.words())
            if (!out.add(w)) return out;
          if (k + 1 >= cfg_.max_loop_iterations) break;
          iter = concat(concat(iter, redo), body);
        }
        return out;
      }
    }
    return Lang(cap_);
  }

 private:
  int intern(const std::string& s) {
    auto it = ids_.find(s);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(symbols_.size());
    symbols_.push_back(s);
    ids_.emplace(s, id);
    return id;
  }

  Lang copy(const Lang& l) {
    Lang out(cap_);
    out.mark_truncated(l.truncated());
    for (const auto& w : l.words()) out.add(w);
    return out;
  }

  Lang concat(const Lang& a, const Lang& b) {
    Lang out(cap_);
    out.mark_truncated(a.truncated() || b.truncated());
    Word w;
    for (const auto& u : a.words()) {
      for (const auto& v : b.words()) {
        w.assign(u.begin(), u.end());
        w.insert(w.end(), v.begin(), v.end());
        if (!out.add(w)) return out;
      }
    }
    return out;
  }

  // Interleavings of u and v, generated in lexicographic order of the
  // choice string (take from u before v).
  bool interleave(const Word& u, const Word& v, std::size_t i, std::size_t j, Word& cur, Lang& out) {
    if (i == u.size() && j == v.size()) return out.add(cur);
    if (i < u.size()) {
      cur.push_back(u[i]);
      const bool ok = interleave(u, v, i + 1, j, cur, out);
      cur.pop_back();
      if (!ok) return false;
    }
    if (j < v.size()) {
      cur.push_back(v[j]);
      const bool ok = interleave(u, v, i, j + 1, cur, out);
      cur.pop_back();
      if (!ok) return false;
    }
    return true;
  }

  Lang shuffle(const Lang& a, const Lang& b) {
    Lang out(cap_);
    out.mark_truncated(a.truncated() || b.truncated());
    Word cur;
    for (const auto& u : a.words())
      for (const auto& v : b.words())
        if (!interleave(u, v, 0, 0, cur, out)) return out;
    return out;
  }

  const PlayoutConfig& cfg_;
  std::size_t cap_;
  std::vector<std::string>& symbols_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace detail::play

/// Enumerates the bounded trace language of `tree`: sequence concatenates,
/// exclusive unions, parallel shuffles, and Loop(do, redo) yields
/// do (redo do)^k for k < max_loop_iterations. Silent-only traces are
/// dropped. When more than max_traces traces exist, the result holds the
/// first max_traces of the depth-first enumeration and is flagged truncated.
inline TraceSet playout(const ProcessTree& tree, const PlayoutConfig& cfg = {}) {
  cfg.validate();
  std::vector<std::string> symbols;
  detail::play::Enumerator en(cfg, symbols);
  const detail::play::Lang lang = en.run(tree.root());

  TraceSet out;
  bool truncated = lang.truncated();
  for (const auto& w : lang.words()) {
    if (w.empty()) continue;
    if (out.size() >= cfg.max_traces) {
      truncated = true;
      break;
    }
    Trace t;
    t.reserve(w.size());
    for (int s : w) t.push_back(symbols[static_cast<std::size_t>(s)]);
    out.insert(std::move(t));
  }
  out.set_truncated(truncated);
  return out;
}

namespace detail::member {

// Regular expressions over activity ids with a shuffle operator. Membership
// is decided with partial derivatives, one event at a time, so the language
// itself is never materialized.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum Kind { Eps, Act, Seq, Alt, Shuffle } kind;
  int label = -1;
  std::vector<ExprPtr> kids;
  std::string key;
  bool nullable = false;
};

inline ExprPtr make(Expr::Kind kind, int label, std::vector<ExprPtr> kids) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->label = label;
  switch (kind) {
    case Expr::Eps:
      e->key = "e";
      e->nullable = true;
      break;
    case Expr::Act:
      e->key = "a" + std::to_string(label);
      break;
    case Expr::Seq:
    case Expr::Alt:
    case Expr::Shuffle: {
      if (kind != Expr::Seq) {
        // Commutative operators get a canonical child order.
        std::sort(kids.begin(), kids.end(), [](const ExprPtr& a, const ExprPtr& b) { return a->key < b->key; });
      }
      e->key = kind == Expr::Seq ? "S(" : kind == Expr::Alt ? "A(" : "P(";
      e->nullable = kind != Expr::Alt;
      for (std::size_t i = 0; i < kids.size(); ++i) {
        if (i) e->key += ',';
        e->key += kids[i]->key;
        if (kind == Expr::Alt)
          e->nullable = e->nullable || kids[i]->nullable;
        else
          e->nullable = e->nullable && kids[i]->nullable;
      }
      e->key += ')';
      e->kids = std::move(kids);
      break;
    }
  }
  return e;
}

inline ExprPtr eps() {
  static const ExprPtr e = make(Expr::Eps, -1, {});
  return e;
}

// Seq/Shuffle with epsilon children removed and single children unwrapped.
inline ExprPtr compose(Expr::Kind kind, std::vector<ExprPtr> kids) {
  std::vector<ExprPtr> kept;
  for (auto& k : kids)
    if (k->kind != Expr::Eps) kept.push_back(std::move(k));
  if (kept.empty()) return eps();
  if (kept.size() == 1) return kept.front();
  return make(kind, -1, std::move(kept));
}

inline ExprPtr optional(ExprPtr e) { return make(Expr::Alt, -1, {eps(), std::move(e)}); }

class Matcher {
 public:
  Matcher(const ProcessTree& tree, std::size_t max_loop) : max_loop_(max_loop) {
    root_ = compile(tree.root());
  }

  bool accepts(const Trace& trace) const {
    if (trace.empty()) return false;
    std::vector<ExprPtr> states{root_};
    for (const auto& ev : trace) {
      auto it = ids_.find(ev);
      if (it == ids_.end()) return false;
      std::vector<ExprPtr> next;
      std::unordered_set<std::string> seen;
      for (const auto& s : states) derive(s, it->second, next, seen);
      if (next.empty()) return false;
      states = std::move(next);
    }
    return std::any_of(states.begin(), states.end(), [](const ExprPtr& s) { return s->nullable; });
  }

 private:
  ExprPtr compile(const Node& n) {
    switch (n.kind) {
      case NodeKind::Activity: {
        auto [it, fresh] = ids_.emplace(n.label, static_cast<int>(ids_.size()));
        return make(Expr::Act, it->second, {});
      }
      case NodeKind::Silent:
        return eps();
      case NodeKind::Sequence:
      case NodeKind::Parallel: {
        std::vector<ExprPtr> kids;
        for (const auto& c : n.children) kids.push_back(compile(c));
        return compose(n.kind == NodeKind::Sequence ? Expr::Seq : Expr::Shuffle, std::move(kids));
      }
      case NodeKind::Exclusive: {
        std::vector<ExprPtr> kids;
        for (const auto& c : n.children) kids.push_back(compile(c));
        return make(Expr::Alt, -1, std::move(kids));
      }
      case NodeKind::Loop: {
        // do (redo do (redo do ...)?)?  unrolled max_loop - 1 times
        ExprPtr body = compile(n.children[0]);
        ExprPtr redo = compile(n.children[1]);
        ExprPtr tail;
        for (std::size_t k = 1; k < max_loop_; ++k) {
          std::vector<ExprPtr> parts{redo, body};
          if (tail) parts.push_back(tail);
          tail = optional(compose(Expr::Seq, std::move(parts)));
        }
        if (!tail) return body;
        return compose(Expr::Seq, {body, tail});
      }
    }
    return eps();
  }

  static void emit(ExprPtr e, std::vector<ExprPtr>& out, std::unordered_set<std::string>& seen) {
    if (seen.insert(e->key).second) out.push_back(std::move(e));
  }

  // Appends the partial derivatives of e with respect to label a.
  static void derive(const ExprPtr& e, int a, std::vector<ExprPtr>& out, std::unordered_set<std::string>& seen) {
    switch (e->kind) {
      case Expr::Eps:
        return;
      case Expr::Act:
        if (e->label == a) emit(eps(), out, seen);
        return;
      case Expr::Alt:
        for (const auto& k : e->kids) derive(k, a, out, seen);
        return;
      case Expr::Seq: {
        const auto& head = e->kids.front();
        std::vector<ExprPtr> rest(e->kids.begin() + 1, e->kids.end());
        std::vector<ExprPtr> heads;
        std::unordered_set<std::string> hseen;
        derive(head, a, heads, hseen);
        for (auto& h : heads) {
          std::vector<ExprPtr> parts{h};
          parts.insert(parts.end(), rest.begin(), rest.end());
          emit(compose(Expr::Seq, std::move(parts)), out, seen);
        }
        if (head->nullable) derive(compose(Expr::Seq, std::move(rest)), a, out, seen);
        return;
      }
      case Expr::Shuffle: {
        for (std::size_t i = 0; i < e->kids.size(); ++i) {
          std::vector<ExprPtr> ds;
          std::unordered_set<std::string> dseen;
          derive(e->kids[i], a, ds, dseen);
          for (auto& d : ds) {
            std::vector<ExprPtr> parts = e->kids;
            parts[i] = d;
            emit(compose(Expr::Shuffle, std::move(parts)), out, seen);
          }
        }
        return;
      }
    }
  }

  std::size_t max_loop_;
  std::unordered_map<std::string, int> ids_;
  ExprPtr root_;
};

}  // namespace detail::member

/// Reusable membership test for one model: accepts(t) holds exactly when t is
/// in the model's bounded language (no trace cap). Thread-safe for reads.
class Membership {
 public:
  Membership(const ProcessTree& tree, const PlayoutConfig& cfg = {})
      : matcher_(std::make_shared<detail::member::Matcher>(tree, cfg.max_loop_iterations)) {
    cfg.validate();
  }

  bool accepts(const Trace& trace) const { return matcher_->accepts(trace); }

 private:
  std::shared_ptr<const detail::member::Matcher> matcher_;
};

inline bool contains(const ProcessTree& tree, const Trace& trace, const PlayoutConfig& cfg = {}) {
  return Membership(tree, cfg).accepts(trace);
}

}  // namespace semlog
