#include <gtest/gtest.h>

#include "semlog/llm_client.hpp"
#include "support/stub_server.hpp"

using namespace semlog;
using testing_support::StubChatServer;
using testing_support::StubReply;

namespace {

EndpointConfig config_for(const StubChatServer& s) {
  EndpointConfig cfg;
  cfg.base_url = s.base_url();
  cfg.model_name = "stub";
  cfg.initial_backoff = std::chrono::milliseconds(5);
  cfg.timeout = std::chrono::milliseconds(5000);
  return cfg;
}

StubReply reply(std::string content) { return {200, std::move(content)}; }

}  // namespace

TEST(LlmDetector, NormalReply) {
  StubChatServer s([](const nlohmann::json&, std::size_t) { return reply("This trace is normal."); });
  const auto v = LlmDetector(config_for(s)).classify({"a", "b"});
  EXPECT_EQ(v.label, Label::Normal);
  EXPECT_TRUE(v.parse_ok);
  EXPECT_FALSE(v.cause.has_value());
  ASSERT_EQ(s.calls(), 1u);

  const auto req = s.requests().at(0);
  EXPECT_EQ(req.at("model"), "stub");
  EXPECT_EQ(req.at("temperature"), 0.0);
  ASSERT_EQ(req.at("messages").size(), 1u);
  EXPECT_EQ(req.at("messages")[0].at("content"), render_prompt({"a", "b"}));
}

TEST(LlmDetector, AnomalousReplyAsksForCause) {
  StubChatServer s([](const nlohmann::json& req, std::size_t) {
    return req.at("messages").size() == 1 ? reply("anomalous") : reply("The activity 'b' is skipped before 'c'.");
  });
  const auto v = LlmDetector(config_for(s)).classify({"a", "c"});
  EXPECT_EQ(v.label, Label::Anomalous);
  EXPECT_TRUE(v.parse_ok);
  EXPECT_EQ(v.cause, "The activity 'b' is skipped before 'c'.");
  ASSERT_EQ(s.calls(), 2u);
  const auto follow = s.requests().at(1).at("messages");
  ASSERT_EQ(follow.size(), 3u);
  EXPECT_EQ(follow[1].at("role"), "assistant");
  EXPECT_EQ(follow[1].at("content"), "anomalous");
  EXPECT_EQ(follow[2].at("content"), "What causes this trace to deviate?");
}

TEST(LlmDetector, UnparseableReplyKeepsRaw) {
  StubChatServer s([](const nlohmann::json&, std::size_t) { return reply("maybe"); });
  const auto v = LlmDetector(config_for(s)).classify({"a"});
  EXPECT_EQ(v.label, Label::Anomalous);
  EXPECT_FALSE(v.parse_ok);
  EXPECT_EQ(v.raw, "maybe");
  EXPECT_EQ(s.calls(), 1u);
}

TEST(LlmDetector, RetriesTransientErrors) {
  StubChatServer s([](const nlohmann::json&, std::size_t i) {
    return i < 2 ? StubReply{503, "busy"} : reply("This trace is normal.");
  });
  EXPECT_EQ(LlmDetector(config_for(s)).classify({"a"}).label, Label::Normal);
  EXPECT_EQ(s.calls(), 3u);
}

TEST(LlmDetector, GivesUpAfterThreeRetries) {
  StubChatServer s([](const nlohmann::json&, std::size_t) { return StubReply{503, "busy"}; });
  try {
    LlmDetector(config_for(s)).classify({"a"}, "t-17");
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("t-17"), std::string::npos);
  }
  EXPECT_EQ(s.calls(), 4u);
}

TEST(LlmDetector, ClientErrorIsNotRetried) {
  StubChatServer s([](const nlohmann::json&, std::size_t) { return StubReply{400, "bad model"}; });
  try {
    LlmDetector(config_for(s)).classify({"a"});
    FAIL() << "expected EndpointError";
  } catch (const EndpointError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_NE(std::string(e.what()).find("bad model"), std::string::npos);
  }
  EXPECT_EQ(s.calls(), 1u);
}

TEST(LlmDetector, ConnectionRefusedIsTransportError) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.initial_backoff = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(500);
  EXPECT_THROW(LlmDetector(cfg).classify({"a"}), TransportError);
}

TEST(LlmDetector, BearerTokenSent) {
  StubChatServer s([](const nlohmann::json&, std::size_t) { return reply("normal"); });
  auto cfg = config_for(s);
  cfg.api_key = "sk-test";
  LlmDetector(cfg).classify({"a"});
  EXPECT_EQ(s.auth_headers().at(0), "Bearer sk-test");

  StubChatServer anon([](const nlohmann::json&, std::size_t) { return reply("normal"); });
  LlmDetector(config_for(anon)).classify({"a"});
  EXPECT_EQ(anon.auth_headers().at(0), "");
}

TEST(LlmDetector, ClassifyAllBoundsConcurrencyAndKeepsOrder) {
  StubChatServer s(
      [](const nlohmann::json& req, std::size_t) {
        const std::string prompt = req.at("messages")[0].at("content");
        return reply(prompt.find("<odd") != std::string::npos ? "This trace is anomalous." : "This trace is normal.");
      },
      std::chrono::milliseconds(20));
  auto cfg = config_for(s);
  cfg.max_concurrent = 3;
  std::vector<Trace> traces;
  for (int i = 0; i < 24; ++i) traces.push_back({i % 2 ? "odd" : "even"});
  const auto out = LlmDetector(cfg).classify_all(traces);
  ASSERT_EQ(out.size(), traces.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_TRUE(out[i].verdict) << out[i].error;
    EXPECT_EQ(out[i].verdict->label, i % 2 ? Label::Anomalous : Label::Normal);
  }
  EXPECT_LE(s.max_in_flight(), 3);
  EXPECT_GE(s.max_in_flight(), 2);
}

TEST(EndpointConfig, Validation) {
  EndpointConfig cfg;
  EXPECT_THROW(LlmDetector{cfg}, std::invalid_argument);
  cfg.base_url = "http://localhost:1/v1";
  cfg.temperature = -1;
  EXPECT_THROW(LlmDetector{cfg}, std::invalid_argument);
  cfg.temperature = 0;
  cfg.max_concurrent = 0;
  EXPECT_THROW(LlmDetector{cfg}, std::invalid_argument);
}
