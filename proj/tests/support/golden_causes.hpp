#pragma once

#include <string>
#include <vector>

#include "semlog/anomaly.hpp"

namespace fixtures {

struct GoldenCause {
  semlog::AnomalyType type;
  semlog::AnomalyMeta meta;
  std::string expected;
};

inline semlog::AnomalyMeta seg(std::vector<std::string> s, std::string anchor = {}) {
  semlog::AnomalyMeta m;
  m.segment = std::move(s);
  if (!anchor.empty()) m.anchor = std::move(anchor);
  return m;
}

inline semlog::AnomalyMeta excl(std::vector<std::string> a, std::vector<std::string> b) {
  semlog::AnomalyMeta m;
  m.segment = std::move(a);
  m.others = std::move(b);
  return m;
}

// One singular and one plural case per anomaly type.
inline std::vector<GoldenCause> golden_causes() {
  using semlog::AnomalyType;
  return {
      {AnomalyType::Skip, seg({"b"}, "c"), "The activity 'b' is skipped before 'c'."},
      {AnomalyType::Skip, seg({"A", "B", "C"}, "D"), "The activities 'A', 'B' and 'C' are skipped before 'D'."},
      {AnomalyType::Insert, seg({"x"}), "The activity 'x' should not be executed."},
      {AnomalyType::Insert, seg({"x", "y"}), "The activities 'x' and 'y' should not be executed."},
      {AnomalyType::Rework, seg({"Assess loan risk"}, "Assess eligibility"),
       "The activity 'Assess loan risk' is reworked after 'Assess eligibility'."},
      {AnomalyType::Rework, seg({"A", "B", "C", "D"}, "E"),
       "The activities 'A', 'B', 'C' and 'D' are reworked after 'E'."},
      {AnomalyType::Early, seg({"Send acceptance pack"}, "Prepare acceptance pack"),
       "The activity 'Send acceptance pack' is executed too early, it should be executed after 'Prepare acceptance "
       "pack'."},
      {AnomalyType::Early, seg({"c", "d"}, "b"),
       "The activities 'c' and 'd' are executed too early, they should be executed after 'b'."},
      {AnomalyType::Late, seg({"a"}, "b"), "The activity 'a' is executed too late, it should be executed before 'b'."},
      {AnomalyType::Late, seg({"a", "b"}, "c"),
       "The activities 'a' and 'b' are executed too late, they should be executed before 'c'."},
      {AnomalyType::Exclusion, excl({"Reject application"}, {"Send acceptance pack"}),
       "The activity 'Reject application' is mutually exclusive with the activity 'Send acceptance pack', meaning "
       "they should not be executed within the same process instance."},
      {AnomalyType::Exclusion, excl({"Prepare acceptance pack", "Send acceptance pack"}, {"Reject application"}),
       "The activities 'Prepare acceptance pack' and 'Send acceptance pack' are mutually exclusive with the activity "
       "'Reject application', meaning they should not be executed within the same process instance."},
  };
}

}  // namespace fixtures
