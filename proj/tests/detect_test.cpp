#include <gtest/gtest.h>

#include "semlog/detect.hpp"
#include "support/fixtures.hpp"
#include "support/random_tree.hpp"

using namespace semlog;

using Pairs = std::set<std::pair<std::string, std::string>>;

TEST(ParseVerdict, Keywords) {
  EXPECT_EQ(parse_verdict("This trace is anomalous."), ParsedVerdict::Anomalous);
  EXPECT_EQ(parse_verdict("Normal."), ParsedVerdict::Normal);
  EXPECT_EQ(parse_verdict("It is not normal, it is anomalous"), ParsedVerdict::Normal);
  EXPECT_EQ(parse_verdict("The trace deviates from the model"), ParsedVerdict::Anomalous);
  EXPECT_EQ(parse_verdict("ABNORMAL behaviour"), ParsedVerdict::Unparseable);
  EXPECT_EQ(parse_verdict("maybe"), ParsedVerdict::Unparseable);
  EXPECT_EQ(parse_verdict(""), ParsedVerdict::Unparseable);
}

TEST(Verdict, UnparseableIsAnomalousWithRaw) {
  const auto v = Verdict::unparseable("maybe");
  EXPECT_EQ(v.label, Label::Anomalous);
  EXPECT_FALSE(v.parse_ok);
  EXPECT_EQ(v.raw, "maybe");
}

TEST(PairIndex, Examples) {
  EXPECT_EQ(train_pair_index(std::vector<Trace>{{"a", "b", "c"}}).pairs, (Pairs{{"a", "b"}, {"a", "c"}, {"b", "c"}}));
  const auto single = train_pair_index(std::vector<Trace>{{"a"}});
  EXPECT_TRUE(single.pairs.empty());
  EXPECT_EQ(single.vocab, (std::set<std::string>{"a"}));
  EXPECT_EQ(train_pair_index(std::vector<Trace>{{"a", "b"}, {"b", "a"}}).pairs, (Pairs{{"a", "b"}, {"b", "a"}}));
}

TEST(PairDetector, Examples) {
  const PairDetector d(train_pair_index(std::vector<Trace>{{"a", "b", "c"}}));
  EXPECT_EQ(d.classify({"a", "c"}).label, Label::Normal);
  const auto v = d.classify({"c", "a"});
  EXPECT_EQ(v.label, Label::Anomalous);
  EXPECT_EQ(v.cause, "The event pair ('c', 'a') is anomalous.");
  EXPECT_EQ(d.classify({"z"}).label, Label::Normal);
}

TEST(PairDetector, NeverFlagsTrainingTraces) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto t = testing_support::random_tree(rng);
    const auto normals = playout(t);
    const PairDetector d(train_pair_index(normals));
    for (const auto& tr : normals) EXPECT_EQ(d.classify(tr).label, Label::Normal);
  }
}

TEST(OracleDetector, LoanModel) {
  const auto t = parse_process_tree(fixtures::kLoanTree);
  const OracleDetector d(t);
  for (const auto& tr : playout(t)) EXPECT_EQ(d.classify(tr).label, Label::Normal);
  EXPECT_EQ(d.classify({"Check credit history", "Assess eligibility", "Reject application"}).label, Label::Anomalous);
  EXPECT_EQ(d.classify({"Check credit history", "Assess loan risk", "Assess eligibility", "Pay out"}).label,
            Label::Anomalous);
  EXPECT_FALSE(d.classify({"x"}).cause.has_value());
}
