#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "semlog/anomaly.hpp"
#include "semlog/common.hpp"

namespace semlog {

enum class Label { Normal, Anomalous };

inline std::string_view to_string(Label l) { return l == Label::Normal ? "normal" : "anomalous"; }

inline Label label_from_string(std::string_view s) {
  if (s == "normal") return Label::Normal;
  if (s == "anomalous") return Label::Anomalous;
  throw DataError("unknown label '" + std::string(s) + "'");
}

struct Turn {
  std::string role;  // "user" | "assistant"
  std::string content;

  friend bool operator==(const Turn&, const Turn&) = default;
};

/// One fine-tuning conversation about a single trace.
struct QAExample {
  std::string id;
  std::string model_id;
  Label label = Label::Normal;
  std::optional<AnomalyType> anomaly_type;
  Trace trace;
  std::vector<Turn> turns;

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

inline constexpr std::string_view kPromptPrefix =
    "In the following business process trace, each executed activity is separated by a comma: <";
inline constexpr std::string_view kPromptSuffix = "> Is this trace normal or anomalous?";
inline constexpr std::string_view kCauseQuestion = "What causes this trace to deviate?";
inline constexpr std::string_view kNormalVerdict = "This trace is normal.";
inline constexpr std::string_view kAnomalousVerdict = "This trace is anomalous.";

inline std::string render_prompt(const Trace& trace) {
  return std::string(kPromptPrefix) + join(trace, ", ") + std::string(kPromptSuffix);
}

/// Recovers the trace from a rendered prompt. Only unambiguous when no label
/// contains ", ".
inline std::optional<Trace> trace_from_prompt(std::string_view prompt) {
  if (prompt.substr(0, kPromptPrefix.size()) != kPromptPrefix) return std::nullopt;
  const auto close = prompt.rfind(kPromptSuffix);
  if (close == std::string_view::npos || close < kPromptPrefix.size()) return std::nullopt;
  std::string_view body = prompt.substr(kPromptPrefix.size(), close - kPromptPrefix.size());
  Trace t;
  while (true) {
    const auto sep = body.find(", ");
    t.emplace_back(body.substr(0, sep));
    if (sep == std::string_view::npos) break;
    body.remove_prefix(sep + 2);
  }
  return t;
}

inline QAExample build_qa(const Trace& trace, Label label, const std::optional<std::string>& cause = std::nullopt) {
  if (trace.empty()) throw std::invalid_argument("build_qa: empty trace");
  if (label == Label::Anomalous && (!cause || cause->empty()))
    throw std::invalid_argument("build_qa: anomalous example requires a cause");
  QAExample ex;
  ex.label = label;
  ex.trace = trace;
  ex.turns.push_back({"user", render_prompt(trace)});
  if (label == Label::Normal) {
    ex.turns.push_back({"assistant", std::string(kNormalVerdict)});
  } else {
    ex.turns.push_back({"assistant", std::string(kAnomalousVerdict)});
    ex.turns.push_back({"user", std::string(kCauseQuestion)});
    ex.turns.push_back({"assistant", *cause});
  }
  return ex;
}

inline QAExample build_qa(const AnomalyRecord& rec) {
  QAExample ex = build_qa(rec.trace, Label::Anomalous, rec.cause);
  ex.anomaly_type = rec.type;
  ex.model_id = rec.source_model_id;
  return ex;
}

/// Throws DataError when the turn structure is inconsistent with the label.
inline void validate(const QAExample& ex) {
  const std::size_t expected = ex.label == Label::Normal ? 2 : 4;
  if (ex.turns.size() != expected)
    throw DataError("example '" + ex.id + "': expected " + std::to_string(expected) + " turns, got " +
                    std::to_string(ex.turns.size()));
  for (std::size_t i = 0; i < ex.turns.size(); ++i) {
    const char* role = i % 2 == 0 ? "user" : "assistant";
    if (ex.turns[i].role != role) throw DataError("example '" + ex.id + "': turn roles must alternate user/assistant");
  }
  if (ex.trace.empty()) throw DataError("example '" + ex.id + "': empty trace");
  if (ex.label == Label::Normal && ex.anomaly_type) throw DataError("example '" + ex.id + "': normal example with anomaly type");
}

// ---------------------------------------------------------------------------
// JSON Lines

inline nlohmann::ordered_json to_json(const QAExample& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["model_id"] = ex.model_id;
  j["label"] = to_string(ex.label);
  j["anomaly_type"] = ex.anomaly_type ? nlohmann::ordered_json(std::string(to_string(*ex.anomaly_type))) : nlohmann::ordered_json(nullptr);
  j["trace"] = ex.trace;
  auto& msgs = j["messages"] = nlohmann::ordered_json::array();
  for (const auto& t : ex.turns) msgs.push_back({{"role", t.role}, {"content", t.content}});
  return j;
}

inline QAExample qa_from_json(const nlohmann::json& j, std::size_t line_no) {
  QAExample ex;
  ex.id = j.contains("id") ? j.at("id").get<std::string>() : std::to_string(line_no);
  ex.model_id = j.value("model_id", std::string());
  ex.label = label_from_string(j.at("label").get<std::string>());
  if (j.contains("anomaly_type") && !j.at("anomaly_type").is_null())
    ex.anomaly_type = anomaly_type_from_string(j.at("anomaly_type").get<std::string>());
  for (const auto& m : j.at("messages"))
    ex.turns.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  if (j.contains("trace")) {
    ex.trace = j.at("trace").get<Trace>();
  } else if (!ex.turns.empty()) {
    if (auto t = trace_from_prompt(ex.turns.front().content)) ex.trace = std::move(*t);
  }
  validate(ex);
  return ex;
}

inline std::string dump_line(const nlohmann::ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::strict);
}

inline void emit_jsonl(const std::vector<QAExample>& examples, std::ostream& out) {
  for (const auto& ex : examples) {
    validate(ex);
    out << dump_line(to_json(ex)) << '\n';
  }
}

/// Calls `fn(json, line_no)` for every nonblank line; line numbers are 1-based.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    try {
      fn(j, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::vector<QAExample> load_jsonl(std::istream& in) {
  std::vector<QAExample> out;
  for_each_json_line(in, [&out](const nlohmann::json& j, std::size_t line_no) { out.push_back(qa_from_json(j, line_no)); });
  return out;
}

inline nlohmann::ordered_json to_json(const AnomalyMeta& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (m.first) j["first"] = m.first;
  if (m.last) j["last"] = m.last;
  j["position"] = m.position;
  j["segment"] = m.segment;
  if (m.anchor) j["anchor"] = *m.anchor;
  if (!m.others.empty()) j["others"] = m.others;
  if (m.node_id) j["node_id"] = *m.node_id;
  return j;
}

inline nlohmann::ordered_json to_json(const AnomalyRecord& r) {
  nlohmann::ordered_json j;
  j["model_id"] = r.source_model_id;
  j["trace"] = r.trace;
  j["label"] = "anomalous";
  j["anomaly_type"] = to_string(r.type);
  j["cause"] = r.cause;
  j["meta"] = to_json(r.meta);
  return j;
}

// ---------------------------------------------------------------------------
// Detector input: either Q&A examples or bare traces (e.g. variants).

struct TraceItem {
  std::string id;
  std::string model_id;
  Trace trace;
  std::optional<Label> gold;
  std::optional<std::string> gold_cause;
  std::optional<AnomalyType> anomaly_type;
  std::size_t count = 1;
};

inline TraceItem item_from_json(const nlohmann::json& j, std::size_t line_no) {
  TraceItem it;
  if (j.contains("messages")) {
    const QAExample ex = qa_from_json(j, line_no);
    it.id = ex.id;
    it.model_id = ex.model_id;
    it.trace = ex.trace;
    it.gold = ex.label;
    it.anomaly_type = ex.anomaly_type;
    if (ex.label == Label::Anomalous) it.gold_cause = ex.turns.back().content;
    return it;
  }
  it.id = j.contains("id") ? j.at("id").get<std::string>() : std::to_string(line_no);
  it.model_id = j.value("model_id", std::string());
  it.trace = j.at("trace").get<Trace>();
  if (it.trace.empty()) throw DataError("empty trace");
  if (j.contains("label") && !j.at("label").is_null()) it.gold = label_from_string(j.at("label").get<std::string>());
  if (j.contains("cause") && j.at("cause").is_string()) it.gold_cause = j.at("cause").get<std::string>();
  if (j.contains("anomaly_type") && j.at("anomaly_type").is_string())
    it.anomaly_type = anomaly_type_from_string(j.at("anomaly_type").get<std::string>());
  it.count = j.value("count", std::size_t{1});
  return it;
}

inline std::vector<TraceItem> load_trace_items(std::istream& in) {
  std::vector<TraceItem> out;
  for_each_json_line(in, [&out](const nlohmann::json& j, std::size_t line_no) { out.push_back(item_from_json(j, line_no)); });
  return out;
}

}  // namespace semlog
