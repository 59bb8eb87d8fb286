#pragma once

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "semlog/common.hpp"
#include "semlog/process_tree.hpp"

namespace semlog {

namespace detail::bpmn {

namespace pt = boost::property_tree;

inline std::string local_name(const std::string& tag) {
  const auto colon = tag.rfind(':');
  return colon == std::string::npos ? tag : tag.substr(colon + 1);
}

inline std::string attr(const pt::ptree& e, const char* name) {
  return e.get<std::string>(std::string("<xmlattr>.") + name, "");
}

enum class Kind { Start, End, Fragment, Xor, And };

struct Vertex {
  Kind kind;
  Node fragment;  // Fragment only
  std::vector<std::string> in;
  std::vector<std::string> out;
};

// Reduces a flow graph of fragments and gateways into a single fragment by
// repeatedly collapsing sequences, matched split/join blocks and back-edge
// loops. Anything left over is not block-structured.
class Reducer {
 public:
  explicit Reducer(std::map<std::string, Vertex> g) : g_(std::move(g)) {}

  Node run() {
    bool changed = true;
    while (changed) {
      changed = drop_pass_through() || merge_sequence() || reduce_block() || reduce_loop();
    }
    std::string start;
    for (auto& [id, v] : g_)
      if (v.kind == Kind::Start) start = id;
    const Vertex& s = g_.at(start);
    if (g_.size() == 3 && s.out.size() == 1) {
      const Vertex& mid = g_.at(s.out[0]);
      if (mid.kind == Kind::Fragment && mid.out.size() == 1 && g_.at(mid.out[0]).kind == Kind::End)
        return mid.fragment;
    }
    if (g_.size() == 2 && s.out.size() == 1 && g_.at(s.out[0]).kind == Kind::End)
      throw ModelError("BPMN process contains no tasks");
    std::vector<std::string> gateways;
    for (auto& [id, v] : g_)
      if (v.kind == Kind::Xor || v.kind == Kind::And) gateways.push_back(id);
    if (gateways.empty())
      throw ModelError("BPMN process is not block-structured");
    throw ModelError("BPMN process is not block-structured; unresolved gateways: " + join(gateways, ", "));
  }

 private:
  static bool is_gateway(Kind k) { return k == Kind::Xor || k == Kind::And; }

  static void replace_one(std::vector<std::string>& v, const std::string& from, const std::string& to) {
    auto it = std::find(v.begin(), v.end(), from);
    if (it != v.end()) *it = to;
  }

  static void erase_one(std::vector<std::string>& v, const std::string& x) {
    auto it = std::find(v.begin(), v.end(), x);
    if (it != v.end()) v.erase(it);
  }

  static Node seq(Node a, Node b) {
    std::vector<Node> kids;
    auto append = [&kids](Node n) {
      if (n.kind == NodeKind::Sequence) {
        for (auto& c : n.children) kids.push_back(std::move(c));
      } else if (n.kind != NodeKind::Silent) {
        kids.push_back(std::move(n));
      }
    };
    append(std::move(a));
    append(std::move(b));
    if (kids.empty()) return Node::silent();
    if (kids.size() == 1) return std::move(kids.front());
    return Node::op(NodeKind::Sequence, std::move(kids));
  }

  std::string fresh_id() { return "__fragment_" + std::to_string(counter_++); }

  // Gateways with a single input and output carry no control flow.
  bool drop_pass_through() {
    for (auto& [id, v] : g_) {
      if (!is_gateway(v.kind) || v.in.size() != 1 || v.out.size() != 1) continue;
      const std::string pred = v.in[0], succ = v.out[0];
      if (pred == id) continue;
      replace_one(g_.at(pred).out, id, succ);
      replace_one(g_.at(succ).in, id, pred);
      g_.erase(id);
      return true;
    }
    return false;
  }

  bool merge_sequence() {
    for (auto& [id, v] : g_) {
      if (v.kind != Kind::Fragment || v.out.size() != 1) continue;
      const std::string next = v.out[0];
      if (next == id) continue;
      Vertex& w = g_.at(next);
      if (w.kind != Kind::Fragment || w.in.size() != 1) continue;
      v.fragment = seq(std::move(v.fragment), std::move(w.fragment));
      v.out = w.out;
      for (const auto& s : w.out) replace_one(g_.at(s).in, next, id);
      g_.erase(next);
      return true;
    }
    return false;
  }

  // split -> {fragment | direct edge}* -> join of the same kind
  bool reduce_block() {
    for (auto& [sid, split] : g_) {
      if (!is_gateway(split.kind) || split.out.size() < 2 || split.in.size() != 1) continue;
      std::string join_id;
      std::vector<std::string> frags;
      std::vector<Node> branches;
      bool ok = true;
      for (const auto& o : split.out) {
        const Vertex& t = g_.at(o);
        std::string target;
        if (t.kind == Kind::Fragment && t.in.size() == 1 && t.out.size() == 1) {
          target = t.out[0];
          frags.push_back(o);
          branches.push_back(t.fragment);
        } else {
          target = o;
          branches.push_back(Node::silent());
        }
        if (join_id.empty()) join_id = target;
        if (target != join_id) {
          ok = false;
          break;
        }
      }
      if (!ok || join_id == sid) continue;
      Vertex& join = g_.at(join_id);
      if (join.kind != split.kind || join.out.size() != 1 || join.in.size() != split.out.size()) continue;

      NodeKind kind = split.kind == Kind::Xor ? NodeKind::Exclusive : NodeKind::Parallel;
      if (kind == NodeKind::Exclusive) {
        // Several direct edges are the same empty branch.
        std::vector<Node> dedup;
        bool has_silent = false;
        for (auto& b : branches) {
          if (b.kind == NodeKind::Silent) {
            if (has_silent) continue;
            has_silent = true;
          }
          dedup.push_back(std::move(b));
        }
        branches = std::move(dedup);
      } else {
        branches.erase(std::remove_if(branches.begin(), branches.end(),
                                      [](const Node& b) { return b.kind == NodeKind::Silent; }),
                       branches.end());
      }
      Node block = branches.empty() ? Node::silent()
                   : branches.size() == 1 ? std::move(branches.front())
                                          : Node::op(kind, std::move(branches));

      const std::string pred = split.in[0], succ = join.out[0];
      const std::string nid = fresh_id();
      Vertex f{Kind::Fragment, std::move(block), {pred}, {succ}};
      replace_one(g_.at(pred).out, sid, nid);
      replace_one(g_.at(succ).in, join_id, nid);
      for (const auto& fr : frags) g_.erase(fr);
      g_.erase(sid);
      g_.erase(join_id);
      g_.emplace(nid, std::move(f));
      return true;
    }
    return false;
  }

  // entry(xor join) -> [do] -> exit(xor split) -> [redo] -> entry
  bool reduce_loop() {
    for (auto& [jid, entry] : g_) {
      if (entry.kind != Kind::Xor || entry.in.size() != 2 || entry.out.size() != 1) continue;
      std::string do_frag, exit_id;
      const Vertex& after = g_.at(entry.out[0]);
      if (after.kind == Kind::Fragment && after.in.size() == 1 && after.out.size() == 1) {
        do_frag = entry.out[0];
        exit_id = after.out[0];
      } else {
        exit_id = entry.out[0];
      }
      if (exit_id == jid) continue;
      Vertex& exit = g_.at(exit_id);
      if (exit.kind != Kind::Xor || exit.in.size() != 1 || exit.out.size() != 2) continue;

      // One exit branch must lead back to the entry, directly or via a fragment.
      std::string redo_frag, back_out, forward_out;
      for (const auto& o : exit.out) {
        if (o == jid) {
          back_out = o;
          continue;
        }
        const Vertex& t = g_.at(o);
        if (back_out.empty() && t.kind == Kind::Fragment && t.in.size() == 1 && t.out.size() == 1 &&
            t.out[0] == jid) {
          back_out = o;
          redo_frag = o;
          continue;
        }
        forward_out = o;
      }
      if (back_out.empty() || forward_out.empty()) continue;
      const std::string back_src = redo_frag.empty() ? exit_id : redo_frag;
      std::string pred;
      for (const auto& i : entry.in)
        if (i != back_src) pred = i;
      if (pred.empty()) continue;

      Node do_part = do_frag.empty() ? Node::silent() : g_.at(do_frag).fragment;
      Node redo_part = redo_frag.empty() ? Node::silent() : g_.at(redo_frag).fragment;
      Node loop = Node::op(NodeKind::Loop, {std::move(do_part), std::move(redo_part)});

      const std::string nid = fresh_id();
      Vertex f{Kind::Fragment, std::move(loop), {pred}, {forward_out}};
      replace_one(g_.at(pred).out, jid, nid);
      replace_one(g_.at(forward_out).in, exit_id, nid);
      if (!do_frag.empty()) g_.erase(do_frag);
      if (!redo_frag.empty()) g_.erase(redo_frag);
      const std::string entry_id = jid;
      g_.erase(exit_id);
      g_.erase(entry_id);
      g_.emplace(nid, std::move(f));
      return true;
    }
    return false;
  }

  std::map<std::string, Vertex> g_;
  int counter_ = 0;
};

}  // namespace detail::bpmn

/// Parses the block-structured subset of BPMN 2.0 XML into a process tree.
/// Accepts task/userTask/serviceTask, exclusive and parallel gateways, one
/// start and one end event, and sequence flows. Loops are exclusive
/// join/split pairs connected by a back edge.
inline ProcessTree parse_bpmn(const std::string& xml, std::string model_id = {}) {
  namespace pt = boost::property_tree;
  using namespace detail::bpmn;

  pt::ptree doc;
  try {
    std::istringstream in(xml);
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed XML: " + e.message(), e.line(), 1);
  }

  std::vector<const pt::ptree*> processes;
  auto scan = [&processes](const pt::ptree& parent, auto& self) -> void {
    for (const auto& [tag, child] : parent) {
      if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
      if (local_name(tag) == "process") {
        processes.push_back(&child);
      } else {
        self(child, self);
      }
    }
  };
  scan(doc, scan);
  if (processes.size() != 1)
    throw ModelError("expected exactly one BPMN process, found " + std::to_string(processes.size()));

  std::map<std::string, Vertex> graph;
  struct Flow {
    std::string id, src, dst;
  };
  std::vector<Flow> flows;
  int starts = 0, ends = 0;

  for (const auto& [tag, e] : *processes.front()) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    const std::string kind = local_name(tag);
    if (kind == "documentation" || kind == "extensionElements") continue;
    const std::string id = attr(e, "id");
    if (kind == "sequenceFlow") {
      flows.push_back({id, attr(e, "sourceRef"), attr(e, "targetRef")});
      continue;
    }
    if (id.empty()) throw ModelError("BPMN element <" + kind + "> has no id");
    Vertex v;
    if (kind == "task" || kind == "userTask" || kind == "serviceTask") {
      std::string name = std::string(trim(attr(e, "name")));
      if (name.empty()) throw ModelError("BPMN task '" + id + "' has no name");
      v = {Kind::Fragment, Node::activity(name), {}, {}};
    } else if (kind == "exclusiveGateway") {
      v = {Kind::Xor, {}, {}, {}};
    } else if (kind == "parallelGateway") {
      v = {Kind::And, {}, {}, {}};
    } else if (kind == "startEvent") {
      v = {Kind::Start, {}, {}, {}};
      ++starts;
    } else if (kind == "endEvent") {
      v = {Kind::End, {}, {}, {}};
      ++ends;
    } else {
      throw ModelError("unsupported BPMN element <" + kind + "> (id '" + id + "')");
    }
    if (!graph.emplace(id, std::move(v)).second) throw ModelError("duplicate BPMN id '" + id + "'");
  }
  if (starts != 1 || ends != 1)
    throw ModelError("BPMN process must have exactly one start and one end event");

  for (const auto& f : flows) {
    auto s = graph.find(f.src);
    auto d = graph.find(f.dst);
    if (s == graph.end() || d == graph.end())
      throw ModelError("sequence flow '" + f.id + "' references an unknown node");
    s->second.out.push_back(f.dst);
    d->second.in.push_back(f.src);
  }
  for (const auto& [id, v] : graph) {
    if (v.kind == Kind::Start && (!v.in.empty() || v.out.size() != 1))
      throw ModelError("start event '" + id + "' must have exactly one outgoing flow");
    if (v.kind == Kind::End && (!v.out.empty() || v.in.size() != 1))
      throw ModelError("end event '" + id + "' must have exactly one incoming flow");
    if (v.kind == Kind::Fragment && (v.in.size() != 1 || v.out.size() != 1))
      throw ModelError("task '" + id + "' must have exactly one incoming and one outgoing flow");
  }

  return ProcessTree(Reducer(std::move(graph)).run(), std::move(model_id));
}

}  // namespace semlog
