#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "semlog/anomaly.hpp"
#include "support/fixtures.hpp"
#include "support/golden_causes.hpp"
#include "support/random_tree.hpp"

using namespace semlog;

namespace {

AnomalyMeta at(std::size_t first, std::size_t last, std::size_t position = 0) {
  AnomalyMeta m;
  m.first = first;
  m.last = last;
  m.position = position;
  return m;
}

const Trace kAbcd{"a", "b", "c", "d"};

}  // namespace

TEST(FormatActivityList, Forms) {
  EXPECT_EQ(format_activity_list({"A"}), "'A'");
  EXPECT_EQ(format_activity_list({"A", "B"}), "'A' and 'B'");
  EXPECT_EQ(format_activity_list({"A", "B", "C", "D"}), "'A', 'B', 'C' and 'D'");
  EXPECT_THROW(format_activity_list({}), std::invalid_argument);
}

TEST(RenderCause, GoldenFixtures) {
  const auto golden = fixtures::golden_causes();
  ASSERT_EQ(golden.size(), 12u);
  for (const auto& g : golden) EXPECT_EQ(render_cause(g.type, g.meta), g.expected) << to_string(g.type);
}

TEST(RenderCause, MissingAnchorOrSecondSet) {
  EXPECT_THROW(render_cause(AnomalyType::Skip, fixtures::seg({"b"})), std::invalid_argument);
  EXPECT_THROW(render_cause(AnomalyType::Exclusion, fixtures::seg({"b"})), std::invalid_argument);
  EXPECT_THROW(render_cause(AnomalyType::Insert, AnomalyMeta{}), std::invalid_argument);
}

TEST(ApplyOrdering, SkipSingle) {
  const auto c = apply_ordering(kAbcd, AnomalyType::Skip, at(2, 2));
  EXPECT_EQ(c.trace, (Trace{"a", "c", "d"}));
  EXPECT_EQ(c.meta.first, 2u);
  EXPECT_EQ(c.meta.last, 2u);
  EXPECT_EQ(render_cause(c.type, c.meta), "The activity 'b' is skipped before 'c'.");
}

TEST(ApplyOrdering, EarlyToFront) {
  const auto c = apply_ordering(kAbcd, AnomalyType::Early, at(3, 4, 1));
  EXPECT_EQ(c.trace, (Trace{"c", "d", "a", "b"}));
  EXPECT_EQ(c.meta.anchor, "b");
}

TEST(ApplyOrdering, LateToEnd) {
  const auto c = apply_ordering(kAbcd, AnomalyType::Late, at(1, 2, 4));
  EXPECT_EQ(c.trace, (Trace{"c", "d", "a", "b"}));
  EXPECT_EQ(c.meta.anchor, "c");
}

TEST(ApplyOrdering, ReworkImmediateAndLater) {
  EXPECT_EQ(apply_ordering(kAbcd, AnomalyType::Rework, at(2, 3, 3)).trace, (Trace{"a", "b", "c", "b", "c", "d"}));
  const auto c = apply_ordering(kAbcd, AnomalyType::Rework, at(1, 1, 4));
  EXPECT_EQ(c.trace, (Trace{"a", "b", "c", "d", "a"}));
  EXPECT_EQ(c.meta.anchor, "d");
}

TEST(ApplyOrdering, InsertAtEnds) {
  AnomalyMeta m;
  m.segment = {"x", "y"};
  m.position = 0;
  EXPECT_EQ(apply_ordering(kAbcd, AnomalyType::Insert, m).trace, (Trace{"x", "y", "a", "b", "c", "d"}));
  m.position = 4;
  EXPECT_EQ(apply_ordering(kAbcd, AnomalyType::Insert, m).trace, (Trace{"a", "b", "c", "d", "x", "y"}));
}

TEST(ApplyOrdering, BoundaryViolations) {
  EXPECT_THROW(apply_ordering(kAbcd, AnomalyType::Skip, at(4, 4)), std::out_of_range);
  EXPECT_THROW(apply_ordering(kAbcd, AnomalyType::Early, at(1, 1, 1)), std::out_of_range);
  EXPECT_THROW(apply_ordering(kAbcd, AnomalyType::Late, at(3, 4, 4)), std::out_of_range);
  EXPECT_THROW(apply_ordering(kAbcd, AnomalyType::Rework, at(2, 3, 2)), std::out_of_range);
  EXPECT_THROW(apply_ordering(kAbcd, AnomalyType::Exclusion, at(1, 1)), std::invalid_argument);
}

TEST(InjectOrdering, InfeasibleOnSingleton) {
  Rng rng(1);
  const Vocabulary vocab{{"a", "b"}};
  for (auto t : {AnomalyType::Skip, AnomalyType::Early, AnomalyType::Late})
    EXPECT_FALSE(inject_ordering({"a"}, t, vocab, rng).has_value()) << to_string(t);
  EXPECT_TRUE(inject_ordering({"a"}, AnomalyType::Rework, vocab, rng).has_value());
  EXPECT_TRUE(inject_ordering({"a"}, AnomalyType::Insert, vocab, rng).has_value());
}

TEST(InjectOrdering, LengthAndMultisetLaws) {
  Rng rng(42);
  const Vocabulary vocab{{"p", "q", "r"}};
  const Trace base{"a", "b", "c", "d", "e", "f"};
  auto sorted = [](Trace t) {
    std::sort(t.begin(), t.end());
    return t;
  };
  for (int i = 0; i < 2000; ++i) {
    const AnomalyType type = kOrderingTypes[rng.uniform(0, kOrderingTypes.size() - 1)];
    const auto c = inject_ordering(base, type, vocab, rng);
    ASSERT_TRUE(c);
    const std::size_t len = c->meta.segment.size();
    ASSERT_GE(len, 1u);
    ASSERT_LE(len, 3u);
    switch (type) {
      case AnomalyType::Skip:
        EXPECT_EQ(c->trace.size(), base.size() - len);
        EXPECT_LT(c->meta.last, base.size());
        break;
      case AnomalyType::Insert:
      case AnomalyType::Rework:
        EXPECT_EQ(c->trace.size(), base.size() + len);
        break;
      case AnomalyType::Early:
        EXPECT_GT(c->meta.first, 1u);
        EXPECT_EQ(sorted(c->trace), sorted(base));
        break;
      case AnomalyType::Late:
        EXPECT_LT(c->meta.last, base.size());
        EXPECT_EQ(sorted(c->trace), sorted(base));
        break;
      case AnomalyType::Exclusion:
        FAIL();
    }
    EXPECT_NO_THROW(render_cause(type, c->meta));
  }
}

TEST(InjectOrdering, SameSeedSameResult) {
  const Vocabulary vocab{{"p", "q"}};
  Rng r1(7), r2(7);
  for (int i = 0; i < 100; ++i) {
    const auto type = kOrderingTypes[static_cast<std::size_t>(i) % kOrderingTypes.size()];
    const auto a = inject_ordering(kAbcd, type, vocab, r1);
    const auto b = inject_ordering(kAbcd, type, vocab, r2);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      EXPECT_EQ(a->trace, b->trace);
      EXPECT_EQ(a->meta, b->meta);
    }
  }
}

TEST(GenOrdering, SingleActivityModelYieldsNothingForSkip) {
  const auto t = parse_process_tree("->('a')");
  Rng rng(3);
  const AnomalyType skip[] = {AnomalyType::Skip};
  EXPECT_TRUE(gen_ordering_anomalies(playout(t), t, vocabulary(std::vector{t}), rng, 10, {}, skip).empty());
}

TEST(GenOrdering, SkipOnSequenceKept) {
  const auto t = parse_process_tree("->('a','b','c')");
  const Membership lang(t);
  const auto rec = make_record(apply_ordering({"a", "b", "c"}, AnomalyType::Skip, at(2, 2)).trace,
                               AnomalyType::Skip, apply_ordering({"a", "b", "c"}, AnomalyType::Skip, at(2, 2)).meta,
                               t, lang);
  EXPECT_EQ(rec.trace, (Trace{"a", "c"}));
  EXPECT_EQ(rec.cause, "The activity 'b' is skipped before 'c'.");
  EXPECT_THROW(make_record({"a", "b", "c"}, AnomalyType::Skip, at(2, 2), t, lang), ModelError);
}

TEST(GenOrdering, DisjointFromLanguageOnRandomModels) {
  Rng rng(2024);
  for (int i = 0; i < 40; ++i) {
    const auto t = testing_support::random_tree(rng, {}, "m" + std::to_string(i));
    const auto normals = playout(t);
    const auto vocab = vocabulary(std::vector{t});
    const auto recs = gen_ordering_anomalies(normals, t, vocab, rng, normals.size());
    std::set<Trace> seen;
    for (const auto& r : recs) {
      EXPECT_FALSE(contains(t, r.trace)) << serialize(t) << " <" << format_trace(r.trace) << ">";
      EXPECT_TRUE(seen.insert(r.trace).second);
      EXPECT_EQ(r.source_model_id, t.model_id());
    }
  }
}

TEST(SwapExclusive, Errors) {
  const auto t = parse_process_tree("->('a','b')");
  for (int id = 0; id < 4; ++id) EXPECT_THROW(swap_exclusive_to_parallel(t, id), ModelError);
}

TEST(SwapExclusive, ChangesOnlyThatNode) {
  const auto t = parse_process_tree("->(X('a','b'),X('c','d'))");
  const auto ids = exclusive_nodes(t);
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_EQ(serialize(swap_exclusive_to_parallel(t, ids[0])), "->(+('a','b'),X('c','d'))");
}

TEST(GenExclusion, TwoWayChoice) {
  const auto t = parse_process_tree("X('a','b')");
  const auto recs = gen_exclusion_anomalies(t, playout(t));
  ASSERT_EQ(recs.size(), 2u);
  std::set<Trace> traces;
  for (const auto& r : recs) {
    traces.insert(r.trace);
    EXPECT_EQ(r.type, AnomalyType::Exclusion);
    EXPECT_EQ(r.cause,
              "The activity 'a' is mutually exclusive with the activity 'b', meaning they should not be executed "
              "within the same process instance.");
  }
  EXPECT_EQ(traces, (std::set<Trace>{{"a", "b"}, {"b", "a"}}));
}

TEST(GenExclusion, LoanModel) {
  const auto t = parse_process_tree(fixtures::kLoanTree);
  const auto normals = playout(t);
  const auto recs = gen_exclusion_anomalies(t, normals);
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) {
    EXPECT_NE(std::find(r.trace.begin(), r.trace.end(), "Send acceptance pack"), r.trace.end());
    EXPECT_NE(std::find(r.trace.begin(), r.trace.end(), "Reject application"), r.trace.end());
    EXPECT_FALSE(normals.contains(r.trace));
    EXPECT_EQ(r.cause,
              "The activities 'Prepare acceptance pack' and 'Send acceptance pack' are mutually exclusive with the "
              "activity 'Reject application', meaning they should not be executed within the same process instance.");
  }
}

TEST(GenExclusion, NoExclusiveNode) {
  const auto t = parse_process_tree("->('a','b')");
  EXPECT_TRUE(gen_exclusion_anomalies(t, playout(t)).empty());
}

TEST(GenExclusion, BranchSetsFilteredToTrace) {
  // The optional 'c' branch means some swapped traces lack it.
  const auto t = parse_process_tree("X('a','b',->('c','d'))");
  for (const auto& r : gen_exclusion_anomalies(t, playout(t))) {
    const std::set<std::string> present(r.trace.begin(), r.trace.end());
    for (const auto& l : r.meta.segment) EXPECT_TRUE(present.count(l));
    for (const auto& l : r.meta.others) EXPECT_TRUE(present.count(l));
    EXPECT_FALSE(contains(t, r.trace));
  }
}

TEST(GenExclusion, EveryRecordSpansTwoBranchesOnRandomModels) {
  Rng rng(99);
  std::size_t produced = 0;
  for (int i = 0; i < 60; ++i) {
    const auto t = testing_support::random_tree(rng, {}, "m");
    const auto ids = exclusive_nodes(t);
    for (const auto& r : gen_exclusion_anomalies(t, playout(t))) {
      ++produced;
      ASSERT_TRUE(r.meta.node_id);
      const auto sets = exclusive_branch_sets(t, *r.meta.node_id);
      const std::set<std::string> present(r.trace.begin(), r.trace.end());
      std::size_t hit = 0;
      for (const auto& s : sets)
        hit += std::any_of(s.begin(), s.end(), [&](const std::string& l) { return present.count(l) > 0; });
      EXPECT_GE(hit, 2u);
      EXPECT_FALSE(contains(t, r.trace));
    }
  }
  EXPECT_GT(produced, 0u);
}
