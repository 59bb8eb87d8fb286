#pragma once

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semlog/common.hpp"

namespace semlog {

struct EventLogVariant {
  Trace trace;
  std::size_t count = 0;

  friend bool operator==(const EventLogVariant&, const EventLogVariant&) = default;
};

struct EventLogColumns {
  std::string case_col = "case_id";
  std::string activity_col = "activity";
  std::string time_col = "timestamp";
  /// When false, a missing time column is tolerated and input order is used.
  bool require_time = false;
};

/// Reads one CSV record (RFC 4180 quoting; quoted fields may span lines).
/// Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (int ch; (ch = in.get()) != std::char_traits<char>::eof();) {
    any = true;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw DataError("CSV: unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

/// Parses ISO-8601 date-times: YYYY-MM-DD[(T| )hh:mm[:ss[.fff]]][Z|(+|-)hh[:]mm].
/// Returns microseconds since the Unix epoch (UTC), or nullopt.
inline std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  s = trim(s);
  std::size_t pos = 0;
  auto digits = [&](std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const char c = s[pos + i];
      if (c < '0' || c > '9') return false;
      v = v * 10 + (c - '0');
    }
    out = v;
    pos += n;
    return true;
  };
  auto lit = [&](char c) {
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  };

  int y, mo, d, h = 0, mi = 0, sec = 0;
  std::int64_t micros = 0;
  if (!digits(4, y) || !lit('-') || !digits(2, mo) || !lit('-') || !digits(2, d)) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t offset_minutes = 0;
  if (pos < s.size()) {
    if (!(lit('T') || lit(' ') || lit('t'))) return std::nullopt;
    if (!digits(2, h) || !lit(':') || !digits(2, mi)) return std::nullopt;
    if (lit(':')) {
      if (!digits(2, sec)) return std::nullopt;
      if (lit('.') || lit(',')) {
        std::int64_t scale = 100000;
        std::size_t n = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
          if (scale > 0) {
            micros += (s[pos] - '0') * scale;
            scale /= 10;
          }
          ++pos;
          ++n;
        }
        if (n == 0) return std::nullopt;
      }
    }
    if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
    if (pos < s.size()) {
      if (lit('Z') || lit('z')) {
      } else if (s[pos] == '+' || s[pos] == '-') {
        const int sign = s[pos] == '-' ? -1 : 1;
        ++pos;
        int oh, om;
        if (!digits(2, oh)) return std::nullopt;
        lit(':');
        if (!digits(2, om)) return std::nullopt;
        offset_minutes = sign * (oh * 60 + om);
      } else {
        return std::nullopt;
      }
    }
    if (pos != s.size()) return std::nullopt;
  }
  const auto days = std::chrono::sys_days(ymd).time_since_epoch().count();
  const std::int64_t secs = static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + sec - offset_minutes * 60;
  return secs * 1000000 + micros;
}

/// Groups rows by case, orders each case by timestamp (ties keep input
/// order), and merges identical activity sequences into variants sorted by
/// descending count, then lexicographically.
inline std::vector<EventLogVariant> import_event_log_csv(std::istream& in, const EventLogColumns& cols = {}) {
  std::vector<std::string> row;
  if (!read_csv_record(in, row)) throw DataError("CSV: missing header row");
  auto find_col = [&row](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < row.size(); ++i)
      if (trim(row[i]) == name) return i;
    return std::nullopt;
  };
  if (!row.empty() && row[0].rfind("\xEF\xBB\xBF", 0) == 0) row[0].erase(0, 3);
  const auto case_idx = find_col(cols.case_col);
  const auto act_idx = find_col(cols.activity_col);
  if (!case_idx) throw DataError("CSV: missing case column '" + cols.case_col + "'");
  if (!act_idx) throw DataError("CSV: missing activity column '" + cols.activity_col + "'");
  const auto time_idx = cols.time_col.empty() ? std::nullopt : find_col(cols.time_col);
  if (cols.require_time && !time_idx) throw DataError("CSV: missing timestamp column '" + cols.time_col + "'");

  struct Event {
    std::int64_t time;
    std::size_t seq;
    std::uint32_t activity;
  };
  std::vector<std::string> activities;
  std::unordered_map<std::string, std::uint32_t> activity_ids;
  std::unordered_map<std::string, std::size_t> case_ids;
  std::vector<std::vector<Event>> cases;

  std::size_t row_no = 1;
  const std::size_t needed = std::max({*case_idx, *act_idx, time_idx.value_or(0)}) + 1;
  while (read_csv_record(in, row)) {
    ++row_no;
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    if (row.size() < needed)
      throw DataError("CSV row " + std::to_string(row_no) + ": expected at least " + std::to_string(needed) + " fields");
    const std::string activity(trim(row[*act_idx]));
    if (activity.empty()) throw DataError("CSV row " + std::to_string(row_no) + ": empty activity");
    std::int64_t time = 0;
    if (time_idx) {
      auto t = parse_iso8601(row[*time_idx]);
      if (!t) throw DataError("CSV row " + std::to_string(row_no) + ": unparseable timestamp '" + row[*time_idx] + "'");
      time = *t;
    }
    auto [ait, anew] = activity_ids.emplace(activity, static_cast<std::uint32_t>(activities.size()));
    if (anew) activities.push_back(activity);
    auto [cit, cnew] = case_ids.emplace(row[*case_idx], cases.size());
    if (cnew) cases.emplace_back();
    cases[cit->second].push_back({time, row_no, ait->second});
  }

  std::map<std::vector<std::uint32_t>, std::size_t> counts;
  std::vector<std::uint32_t> seq;
  for (auto& c : cases) {
    std::stable_sort(c.begin(), c.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
    seq.clear();
    for (const auto& e : c) seq.push_back(e.activity);
    ++counts[seq];
  }

  std::vector<EventLogVariant> out;
  out.reserve(counts.size());
  for (const auto& [s, n] : counts) {
    EventLogVariant v;
    v.count = n;
    for (auto a : s) v.trace.push_back(activities[a]);
    out.push_back(std::move(v));
  }
  std::sort(out.begin(), out.end(), [](const EventLogVariant& a, const EventLogVariant& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.trace < b.trace;
  });
  return out;
}

}  // namespace semlog
