#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semlog/common.hpp"

namespace semlog {

enum class NodeKind { Activity, Silent, Sequence, Exclusive, Parallel, Loop };

inline bool is_operator(NodeKind k) {
  return k == NodeKind::Sequence || k == NodeKind::Exclusive || k == NodeKind::Parallel ||
         k == NodeKind::Loop;
}

struct Node {
  int id = -1;
  NodeKind kind = NodeKind::Silent;
  std::string label;  // Activity only
  std::vector<Node> children;

  static Node activity(std::string label) { return Node{-1, NodeKind::Activity, std::move(label), {}}; }
  static Node silent() { return Node{-1, NodeKind::Silent, {}, {}}; }
  static Node op(NodeKind kind, std::vector<Node> children) {
    return Node{-1, kind, {}, std::move(children)};
  }

  friend bool operator==(const Node& a, const Node& b) {
    return a.kind == b.kind && a.label == b.label && a.children == b.children;
  }
};

/// A block-structured process model. Immutable once built: construction
/// normalizes single-child operators, validates labels and loop arity, and
/// numbers nodes in document (pre-)order starting at 0.
class ProcessTree {
 public:
  ProcessTree() : ProcessTree(Node::silent()) {}

  explicit ProcessTree(Node root, std::string model_id = {}) : model_id_(std::move(model_id)) {
    root_ = normalize(std::move(root));
    int next = 0;
    number(root_, next);
    size_ = static_cast<std::size_t>(next);
  }

  const Node& root() const noexcept { return root_; }
  const std::string& model_id() const noexcept { return model_id_; }
  std::size_t size() const noexcept { return size_; }

  ProcessTree with_model_id(std::string id) const {
    ProcessTree t = *this;
    t.model_id_ = std::move(id);
    return t;
  }

  const Node* find(int id) const { return find_in(root_, id); }

  /// Returns a copy in which node `id` has kind `kind`. Ids are preserved.
  ProcessTree with_kind(int id, NodeKind kind) const {
    ProcessTree t = *this;
    Node* n = find_in(t.root_, id);
    if (!n) throw ModelError("node " + std::to_string(id) + " not found");
    if (!is_operator(n->kind) || !is_operator(kind) || (kind == NodeKind::Loop) != (n->kind == NodeKind::Loop))
      throw ModelError("cannot change kind of node " + std::to_string(id));
    n->kind = kind;
    return t;
  }

  friend bool operator==(const ProcessTree& a, const ProcessTree& b) { return a.root_ == b.root_; }

 private:
  static Node normalize(Node n) {
    switch (n.kind) {
      case NodeKind::Activity: {
        std::string_view t = trim(n.label);
        if (t.empty()) throw ModelError("activity label is empty");
        if (t.find_first_of("<>") != std::string_view::npos)
          throw ModelError("activity label '" + std::string(t) + "' contains an angle bracket");
        n.label = std::string(t);
        if (!n.children.empty()) throw ModelError("activity '" + n.label + "' has children");
        return n;
      }
      case NodeKind::Silent:
        if (!n.children.empty()) throw ModelError("silent step has children");
        n.label.clear();
        return n;
      default:
        break;
    }
    if (n.children.empty()) throw ModelError("operator node without children");
    for (auto& c : n.children) c = normalize(std::move(c));
    if (n.kind == NodeKind::Loop) {
      if (n.children.size() != 2)
        throw ModelError("loop requires exactly 2 children (do, redo), got " +
                         std::to_string(n.children.size()));
      return n;
    }
    if (n.children.size() == 1) return std::move(n.children.front());
    return n;
  }

  static void number(Node& n, int& next) {
    n.id = next++;
    for (auto& c : n.children) number(c, next);
  }

  template <typename N>
  static N* find_in(N& n, int id) {
    if (n.id == id) return &n;
    for (auto& c : n.children)
      if (auto* hit = find_in(c, id)) return hit;
    return nullptr;
  }

  Node root_;
  std::string model_id_;
  std::size_t size_ = 0;
};

/// Activity labels across a model collection; sorted, deduplicated, no silent steps.
struct Vocabulary {
  std::vector<std::string> labels;

  bool contains(const std::string& l) const {
    return std::binary_search(labels.begin(), labels.end(), l);
  }
  bool empty() const noexcept { return labels.empty(); }
  std::size_t size() const noexcept { return labels.size(); }
};

namespace detail {

inline void collect_labels(const Node& n, std::vector<std::string>& out) {
  if (n.kind == NodeKind::Activity) out.push_back(n.label);
  for (const auto& c : n.children) collect_labels(c, out);
}

inline void collect_exclusive(const Node& n, std::vector<int>& out) {
  if (n.kind == NodeKind::Exclusive) out.push_back(n.id);
  for (const auto& c : n.children) collect_exclusive(c, out);
}

}  // namespace detail

/// Activity labels under `n` in document order, first occurrence kept.
inline std::vector<std::string> labels_in_order(const Node& n) {
  std::vector<std::string> all;
  detail::collect_labels(n, all);
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& l : all)
    if (seen.insert(l).second) out.push_back(std::move(l));
  return out;
}

inline std::vector<int> exclusive_nodes(const ProcessTree& tree) {
  std::vector<int> ids;
  detail::collect_exclusive(tree.root(), ids);
  return ids;
}

template <typename Range>
Vocabulary vocabulary(const Range& trees) {
  std::set<std::string> s;
  for (const ProcessTree& t : trees) {
    std::vector<std::string> ls;
    detail::collect_labels(t.root(), ls);
    s.insert(ls.begin(), ls.end());
  }
  return Vocabulary{{s.begin(), s.end()}};
}

inline Vocabulary vocabulary(const ProcessTree& tree) {
  return vocabulary(std::vector<ProcessTree>{tree});
}

// ---------------------------------------------------------------------------
// Text notation
//
//   node := leaf | op '(' node (',' node)* ')'
//   op   := '->' | 'X' | '+' | '*'
//   leaf := '\'' label '\'' | 'tau'
//
// '' inside a quoted label is an escaped apostrophe.

namespace detail {

class TreeParser {
 public:
  explicit TreeParser(std::string_view text) : text_(text) {}

  Node parse() {
    skip_ws();
    Node n = parse_node();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { fail_at(msg, pos_); }

  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(msg, line, col);
  }

  void skip_ws() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  bool starts_with(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

  Node parse_node() {
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const std::size_t start = pos_;
    if (text_[pos_] == '\'') return parse_label();
    if (starts_with("tau")) {
      const std::size_t after = pos_ + 3;
      const bool boundary = after >= text_.size() || !(std::isalnum(static_cast<unsigned char>(text_[after])) || text_[after] == '_');
      if (boundary) {
        pos_ = after;
        return Node::silent();
      }
    }
    NodeKind kind;
    if (starts_with("->")) {
      kind = NodeKind::Sequence;
      pos_ += 2;
    } else if (text_[pos_] == 'X') {
      kind = NodeKind::Exclusive;
      ++pos_;
    } else if (text_[pos_] == '+') {
      kind = NodeKind::Parallel;
      ++pos_;
    } else if (text_[pos_] == '*') {
      kind = NodeKind::Loop;
      ++pos_;
    } else {
      fail("expected an operator, a quoted label or 'tau'");
    }
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != '(') fail("expected '('");
    ++pos_;
    std::vector<Node> children;
    for (;;) {
      skip_ws();
      children.push_back(parse_node());
      skip_ws();
      if (pos_ >= text_.size()) fail("unexpected end of input, expected ',' or ')'");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      fail("expected ',' or ')'");
    }
    if (kind == NodeKind::Loop && children.size() != 2)
      fail_at("loop requires exactly 2 children (do, redo), got " + std::to_string(children.size()), start);
    return Node::op(kind, std::move(children));
  }

  Node parse_label() {
    const std::size_t start = pos_;
    ++pos_;
    std::string label;
    for (;;) {
      if (pos_ >= text_.size()) fail_at("unterminated label", start);
      const char c = text_[pos_++];
      if (c == '\'') {
        if (pos_ < text_.size() && text_[pos_] == '\'') {
          label += '\'';
          ++pos_;
          continue;
        }
        break;
      }
      label += c;
    }
    std::string_view t = trim(label);
    if (t.empty()) fail_at("empty activity label", start);
    if (t.find_first_of("<>") != std::string_view::npos) fail_at("activity label contains an angle bracket", start);
    return Node::activity(std::string(t));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void serialize_into(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Activity:
      out += '\'';
      for (char c : n.label) {
        if (c == '\'') out += '\'';
        out += c;
      }
      out += '\'';
      return;
    case NodeKind::Silent:
      out += "tau";
      return;
    case NodeKind::Sequence:
      out += "->(";
      break;
    case NodeKind::Exclusive:
      out += "X(";
      break;
    case NodeKind::Parallel:
      out += "+(";
      break;
    case NodeKind::Loop:
      out += "*(";
      break;
  }
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i) out += ',';
    serialize_into(n.children[i], out);
  }
  out += ')';
}

}  // namespace detail

inline ProcessTree parse_process_tree(std::string_view text, std::string model_id = {}) {
  return ProcessTree(detail::TreeParser(text).parse(), std::move(model_id));
}

inline std::string serialize(const Node& n) {
  std::string out;
  detail::serialize_into(n, out);
  return out;
}

inline std::string serialize(const ProcessTree& t) { return serialize(t.root()); }

}  // namespace semlog
