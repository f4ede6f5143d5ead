#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "rtc/error.hpp"
#include "rtc/policy.hpp"
#include "rtc/service/campaign.hpp"
#include "rtc/service/config.hpp"

using namespace rtc;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

const std::string kMinimal = "policy: policy.yaml\nroster: roster.yaml\n";

std::string config_error(const std::string& text) {
  try {
    parse_campaign_config(text, "/base");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_config") << e.what();
    return e.what();
  }
  ADD_FAILURE() << "config was accepted:\n" << text;
  return {};
}

void expect_field(const std::string& text, const std::string& field) {
  const std::string message = config_error(text);
  EXPECT_NE(message.find("'" + field + "'"), std::string::npos) << message;
}

}  // namespace

TEST(Config, MinimalConfigUsesDefaults) {
  const CampaignConfig c = parse_campaign_config(kMinimal, "/base");
  EXPECT_EQ(c.policy_path, std::filesystem::path("/base/policy.yaml"));
  EXPECT_EQ(c.roster_path, std::filesystem::path("/base/roster.yaml"));
  EXPECT_EQ(c.data_dir, std::filesystem::path("/base/data"));
  EXPECT_FALSE(c.topic_repository_path.has_value());
  EXPECT_EQ(c.quota_per_cell, 1u);
  EXPECT_EQ(c.arbitration_threshold, 2);
  EXPECT_EQ(c.consensus, ConsensusRule::max);
  EXPECT_EQ(c.backend, BackendKind::echo);
  EXPECT_TRUE(c.in_group_priority);
  EXPECT_FALSE(c.reveal_ratings);
  ASSERT_TRUE(c.pairing.has_value());
  EXPECT_EQ(enumerate_targets(c.axes, c.pairing).size(), 15u);
}

TEST(Config, AbsolutePathsAreKept) {
  const CampaignConfig c =
      parse_campaign_config("policy: /etc/p.yaml\nroster: r.yaml\ndata_dir: /var/rtc\n", "/base");
  EXPECT_EQ(c.policy_path, std::filesystem::path("/etc/p.yaml"));
  EXPECT_EQ(c.data_dir, std::filesystem::path("/var/rtc"));
}

TEST(Config, ScaffoldParses) {
  const CampaignConfig c = parse_campaign_config(default_config_yaml(), "/base");
  EXPECT_EQ(c.topic_source, TopicSource::suggested_repository);
  EXPECT_EQ(c.topic_repository_path, std::filesystem::path("/base/topics.txt"));
  EXPECT_EQ(c.quota_per_cell, 2u);
  EXPECT_EQ(c.use_cases.size(), 4u);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.snapshot_every, 500u);
  EXPECT_EQ(enumerate_targets(c.axes, c.pairing).size(), 15u);
  const ContentPolicy policy = load_policy(default_policy_yaml());
  EXPECT_EQ(policy.rules().size(), 6u);
}

TEST(Config, ErrorsNameTheField) {
  expect_field("roster: r.yaml\n", "policy");
  expect_field("policy: p.yaml\n", "roster");
  expect_field(kMinimal + "quota_per_cell: 0\n", "quota_per_cell");
  expect_field(kMinimal + "quota_per_cell: many\n", "quota_per_cell");
  expect_field(kMinimal + "use_cases: []\n", "use_cases");
  expect_field(kMinimal + "arbitration_threshold: 4\n", "arbitration_threshold");
  expect_field(kMinimal + "consensus: median\n", "consensus");
  expect_field(kMinimal + "backend: gpt\n", "backend");
  expect_field(kMinimal + "backend: remote\n", "chat_endpoint");
  expect_field(kMinimal + "chat_endpoint: {timeout_seconds: 3}\n", "chat_endpoint.url");
  expect_field(kMinimal + "chat_endpoint: {url: 'http://x', timeout_seconds: 0}\n", "chat_endpoint.timeout_seconds");
  expect_field(kMinimal + "server: {port: 70000}\n", "server.port");
  expect_field(kMinimal + "topic_source: suggested_repository\n", "topics");
  expect_field(kMinimal + "topic_source: wiki\n", "topic_source");
  expect_field(kMinimal + "schema_version: 9\n", "schema_version");
  expect_field(kMinimal + "qouta_per_cell: 2\n", "qouta_per_cell");
  expect_field(kMinimal + "axes: {race: []}\n", "axes.race");
  expect_field(kMinimal + "pairing: {first_axis: race}\n", "pairing.first_labels");
}

TEST(Config, MalformedYamlIsParseError) {
  try {
    parse_campaign_config("policy: [unclosed\n", "/base");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "parse_error");
  }
  try {
    parse_campaign_config("- a\n- b\n", "/base");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "parse_error");
  }
}

TEST(Config, RemoteEndpointFields) {
  const CampaignConfig c = parse_campaign_config(kMinimal + R"(backend: remote
chat_endpoint:
  url: http://127.0.0.1:9000/chat
  auth_token_env_var: CHAT_TOKEN
  timeout_seconds: 5
  max_retries: 3
  initial_backoff_ms: 50
  mapping: {messages_field: history, reply_pointer: /choices/0/text}
)",
                                                 "/base");
  ASSERT_TRUE(c.chat_endpoint.has_value());
  EXPECT_EQ(c.chat_endpoint->endpoint_url, "http://127.0.0.1:9000/chat");
  EXPECT_EQ(c.chat_endpoint->auth_token_env_var_name, "CHAT_TOKEN");
  EXPECT_DOUBLE_EQ(c.chat_endpoint->timeout_seconds, 5.0);
  EXPECT_EQ(c.chat_endpoint->max_retries, 3);
  EXPECT_EQ(c.chat_endpoint->initial_backoff.count(), 50);
  EXPECT_EQ(c.chat_endpoint->mapping.messages_field, "history");
  EXPECT_EQ(c.chat_endpoint->mapping.reply_pointer, "/choices/0/text");
}

TEST(Config, CustomAxesWithoutPairingCrossAllLabels) {
  const CampaignConfig c =
      parse_campaign_config(kMinimal + "axes:\n  religion: [A, B, C]\n", "/base");
  EXPECT_FALSE(c.pairing.has_value());
  EXPECT_EQ(enumerate_targets(c.axes, c.pairing).size(), 3u);
}

TEST(Config, SetupFromScaffoldFiles) {
  const auto dir = std::filesystem::temp_directory_path() / ("rtc_config_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  write_file(dir / "config.yaml", default_config_yaml());
  write_file(dir / "policy.yaml", default_policy_yaml());
  write_file(dir / "roster.yaml", default_roster_yaml());
  write_file(dir / "topics.txt", default_topics_text());
  const CampaignConfig c = load_campaign_config(dir / "config.yaml");
  const CampaignSetup setup = setup_from_config(c);
  EXPECT_EQ(setup.roster.size(), 6u);
  EXPECT_EQ(setup.topics.size(), 8u);
  EXPECT_EQ(setup.quota_per_cell, 2u);
  EXPECT_EQ(setup.seed, 7u);
  EXPECT_NE(backend_from_config(c), nullptr);
  std::filesystem::remove_all(dir);
}
