#include <gtest/gtest.h>

#include <string>

#include "semlog/bpmn.hpp"
#include "semlog/playout.hpp"
#include "support/bpmn_writer.hpp"
#include "support/oracle.hpp"
#include "support/random_tree.hpp"

using namespace semlog;

namespace {

std::string wrap(const std::string& body) {
  return "<?xml version=\"1.0\"?>\n"
         "<definitions xmlns=\"http://www.omg.org/spec/BPMN/20100524/MODEL\">\n"
         "<process id=\"p\">\n" +
         body + "</process>\n</definitions>\n";
}

std::string flow(const std::string& id, const std::string& s, const std::string& t) {
  return "<sequenceFlow id=\"" + id + "\" sourceRef=\"" + s + "\" targetRef=\"" + t + "\"/>\n";
}

}  // namespace

TEST(ParseBpmn, LinearChain) {
  const std::string xml = wrap(
      "<startEvent id=\"s\"/><task id=\"t1\" name=\"a\"/><userTask id=\"t2\" name=\"b\"/><endEvent id=\"e\"/>\n" +
      flow("f1", "s", "t1") + flow("f2", "t1", "t2") + flow("f3", "t2", "e"));
  EXPECT_EQ(serialize(parse_bpmn(xml)), "->('a','b')");
}

TEST(ParseBpmn, ExclusiveBlock) {
  const std::string xml = wrap(
      "<startEvent id=\"s\"/><exclusiveGateway id=\"g1\"/><task id=\"ta\" name=\"a\"/>"
      "<serviceTask id=\"tb\" name=\"b\"/><exclusiveGateway id=\"g2\"/><endEvent id=\"e\"/>\n" +
      flow("f1", "s", "g1") + flow("f2", "g1", "ta") + flow("f3", "g1", "tb") + flow("f4", "ta", "g2") +
      flow("f5", "tb", "g2") + flow("f6", "g2", "e"));
  EXPECT_EQ(parse_bpmn(xml), parse_process_tree("X('a','b')"));
}

TEST(ParseBpmn, BackEdgeLoop) {
  const std::string xml = wrap(
      "<startEvent id=\"s\"/><exclusiveGateway id=\"j\"/><task id=\"ta\" name=\"a\"/>"
      "<exclusiveGateway id=\"x\"/><task id=\"tb\" name=\"b\"/><endEvent id=\"e\"/>\n" +
      flow("f1", "s", "j") + flow("f2", "j", "ta") + flow("f3", "ta", "x") + flow("f4", "x", "tb") +
      flow("f5", "tb", "j") + flow("f6", "x", "e"));
  EXPECT_EQ(parse_bpmn(xml), parse_process_tree("*('a','b')"));
}

TEST(ParseBpmn, SplitWithoutJoinIsRejectedWithGatewayIds) {
  const std::string xml = wrap(
      "<startEvent id=\"s\"/><exclusiveGateway id=\"split1\"/><task id=\"ta\" name=\"a\"/>"
      "<task id=\"tb\" name=\"b\"/><endEvent id=\"e\"/><endEvent id=\"e2\"/>\n" +
      flow("f1", "s", "split1") + flow("f2", "split1", "ta") + flow("f3", "split1", "tb") + flow("f4", "ta", "e") +
      flow("f5", "tb", "e2"));
  EXPECT_THROW(parse_bpmn(xml), ModelError);

  // single end event, but the branches merge through different gateways
  const std::string crossed = wrap(
      "<startEvent id=\"s\"/><parallelGateway id=\"ps\"/><task id=\"ta\" name=\"a\"/>"
      "<task id=\"tb\" name=\"b\"/><exclusiveGateway id=\"xj\"/><endEvent id=\"e\"/>\n" +
      flow("f1", "s", "ps") + flow("f2", "ps", "ta") + flow("f3", "ps", "tb") + flow("f4", "ta", "xj") +
      flow("f5", "tb", "xj") + flow("f6", "xj", "e"));
  try {
    parse_bpmn(crossed);
    FAIL() << "expected rejection";
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ps"), std::string::npos) << msg;
    EXPECT_NE(msg.find("xj"), std::string::npos) << msg;
  }
}

TEST(ParseBpmn, UnsupportedElementIsNamed) {
  const std::string xml = wrap("<startEvent id=\"s\"/><inclusiveGateway id=\"or1\"/><endEvent id=\"e\"/>\n" +
                               flow("f1", "s", "or1") + flow("f2", "or1", "e"));
  try {
    parse_bpmn(xml);
    FAIL() << "expected rejection";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("inclusiveGateway"), std::string::npos);
  }
}

TEST(ParseBpmn, MalformedXmlAndMultipleStarts) {
  EXPECT_THROW(parse_bpmn("<definitions><process>"), ParseError);
  const std::string xml = wrap("<startEvent id=\"s\"/><startEvent id=\"s2\"/><task id=\"t\" name=\"a\"/>"
                               "<endEvent id=\"e\"/>\n" +
                               flow("f1", "s", "t") + flow("f2", "s2", "t") + flow("f3", "t", "e"));
  EXPECT_THROW(parse_bpmn(xml), ModelError);
}

// Exported random trees parse back to a model with the same language.
TEST(ParseBpmn, PlayoutMatchesSourceStructure) {
  Rng rng(99);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const auto src = testing_support::random_tree(rng, {.max_leaves = 6, .max_depth = 4});
    const auto expected = oracle::traces(src);
    if (expected.empty()) continue;
    const std::string xml = testing_support::BpmnWriter().write(src);
    ProcessTree parsed;
    ASSERT_NO_THROW(parsed = parse_bpmn(xml)) << serialize(src) << "\n" << xml;
    const auto got = playout(parsed, {.max_loop_iterations = 2, .max_traces = 1000000});
    const oracle::Words actual(got.begin(), got.end());
    EXPECT_EQ(actual, expected) << serialize(src) << " -> " << serialize(parsed);
    ++checked;
  }
  EXPECT_GT(checked, 200);
}
