#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>

#include "idiff/iqa_scores.hpp"
#include "idiff/mllm_client.hpp"

using namespace idiff;
using remote::ErrorKind;
using remote::HttpRequest;
using remote::HttpResponse;
using remote::RemoteError;
using remote::TransportFailure;
using remote::TransportResult;

namespace {

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

PromptBundle bundle(const std::string& id) {
  PromptBundle b;
  b.sample_id = id;
  b.system_text = "sys";
  b.user_text = "compare " + id;
  b.images = {ImageBuffer(2, 2, 3, 10), ImageBuffer(2, 2, 3, 20), ImageBuffer(2, 2, 3, 30), ImageBuffer(2, 2, 3, 40)};
  return b;
}

EndpointConfig endpoint(int retries = 3) {
  EndpointConfig c;
  c.base_url = "http://mock:9/v1";
  c.model_name = "mock-model";
  c.max_retries = retries;
  c.auth_token = "tok";
  return c;
}

/// Replays a fixed script of responses, then repeats the last one; records requests.
struct Script {
  Script() = default;
  Script(std::initializer_list<TransportResult> s) : steps(s) {}

  std::vector<TransportResult> steps;
  std::vector<HttpRequest> seen;
  std::mutex mu;

  remote::Transport transport() {
    return [this](const HttpRequest& req) -> TransportResult {
      std::lock_guard lock(mu);
      seen.push_back(req);
      return steps[std::min(seen.size() - 1, steps.size() - 1)];
    };
  }
};

struct SleepLog {
  std::vector<double> waits;
  remote::RetryPolicy policy() {
    remote::RetryPolicy p;
    p.sleep = [this](std::chrono::duration<double> d) { waits.push_back(d.count()); };
    return p;
  }
};

template <class F>
ErrorKind error_kind(F&& f, int* attempts = nullptr) {
  try {
    f();
  } catch (const RemoteError& e) {
    if (attempts) *attempts = e.attempts();
    return e.kind();
  }
  ADD_FAILURE() << "no RemoteError thrown";
  return ErrorKind::Internal;
}

PairSample score_sample(const std::string& id) {
  PairSample s;
  s.id = id;
  s.global_pair = ImageBuffer(8, 4, 3, 90);
  s.crop_pair = ImageBuffer(8, 4, 3, 60);
  return s;
}

std::string score_body(const std::string& id) {
  nlohmann::json arr = nlohmann::json::array();
  arr.push_back({{"id", id}, {"view", "a_global"}, {"liqe", 4.0}});
  arr.push_back({{"id", id}, {"view", "b_global"}, {"liqe", 3.0}, {"qalign", 2.5}});
  return arr.dump();
}

}  // namespace

TEST(Retry, ServerErrorsAreRetriedWithGrowingBackoff) {
  Script s{HttpResponse{500, ""}, HttpResponse{503, ""}, HttpResponse{502, ""}, HttpResponse{200, completion("ok")}};
  SleepLog sleeps;
  const MllmClient client(endpoint(3), s.transport(), sleeps.policy());
  EXPECT_EQ(client.chat_complete(bundle("s1")), "ok");
  EXPECT_EQ(s.seen.size(), 4u);
  ASSERT_EQ(sleeps.waits.size(), 3u);
  // Full jitter: the k-th wait lies in [0, 0.5 * 2^k).
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_GE(sleeps.waits[k], 0.0);
    EXPECT_LT(sleeps.waits[k], 0.5 * std::pow(2.0, static_cast<double>(k)));
  }
}

TEST(Retry, GivesUpAfterMaxRetries) {
  Script s{TransportFailure{ErrorKind::Timeout, "slow"}};
  SleepLog sleeps;
  const MllmClient client(endpoint(2), s.transport(), sleeps.policy());
  int attempts = 0;
  EXPECT_EQ(error_kind([&] { client.chat_complete(bundle("s1")); }, &attempts), ErrorKind::Timeout);
  EXPECT_EQ(attempts, 3);
  EXPECT_EQ(s.seen.size(), 3u);
  EXPECT_EQ(sleeps.waits.size(), 2u);
}

TEST(Retry, RateLimitAndConnectionFailuresRetry) {
  Script s{HttpResponse{429, ""}, TransportFailure{ErrorKind::Connection, "refused"}, HttpResponse{200, completion("x")}};
  SleepLog sleeps;
  EXPECT_EQ(MllmClient(endpoint(), s.transport(), sleeps.policy()).chat_complete(bundle("s")), "x");
  EXPECT_EQ(s.seen.size(), 3u);
}

TEST(Retry, AuthFailuresAreNotRetried) {
  for (int status : {401, 403}) {
    Script s{HttpResponse{status, ""}, HttpResponse{200, completion("late")}};
    SleepLog sleeps;
    const MllmClient client(endpoint(), s.transport(), sleeps.policy());
    EXPECT_EQ(error_kind([&] { client.chat_complete(bundle("s")); }), ErrorKind::AuthFailure);
    EXPECT_EQ(s.seen.size(), 1u);
    EXPECT_TRUE(sleeps.waits.empty());
  }
}

TEST(Retry, ClientErrorsAreNotRetried) {
  Script s{HttpResponse{400, "bad"}};
  SleepLog sleeps;
  const MllmClient client(endpoint(), s.transport(), sleeps.policy());
  try {
    client.chat_complete(bundle("s9"));
    FAIL();
  } catch (const RemoteError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::HttpStatus);
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.sample_id(), "s9");
  }
  EXPECT_EQ(s.seen.size(), 1u);
}

TEST(MllmClient, RequestShapeAndBearerToken) {
  Script s{HttpResponse{200, completion("<thinking>t</thinking><answer>A</answer>")}};
  auto cfg = endpoint();
  cfg.temperature = 0.0;
  const MllmClient client(cfg, s.transport(), SleepLog{}.policy());
  client.chat_complete(bundle("s1"));
  ASSERT_EQ(s.seen.size(), 1u);
  const auto& req = s.seen[0];
  EXPECT_EQ(req.path, "/v1/chat/completions");
  EXPECT_EQ(req.headers, (std::vector<std::pair<std::string, std::string>>{{"Authorization", "Bearer tok"}}));
  const auto j = nlohmann::json::parse(req.body);
  EXPECT_EQ(j["model"], "mock-model");
  EXPECT_EQ(j["temperature"], 0.0);
  EXPECT_FALSE(j.contains("max_tokens"));
  ASSERT_EQ(j["messages"].size(), 2u);
  EXPECT_EQ(j["messages"][0]["role"], "system");
  const auto& content = j["messages"][1]["content"];
  ASSERT_EQ(content.size(), 5u);
  EXPECT_EQ(content[0]["text"], "compare s1");
  for (std::size_t i = 1; i < 5; ++i) {
    EXPECT_EQ(content[i]["type"], "image_url");
    EXPECT_EQ(content[i]["image_url"]["url"], "data:image/png;base64," + base64_encode(encode_png(bundle("s1").images[i - 1])));
  }
}

TEST(MllmClient, NoTokenMeansNoAuthorizationHeader) {
  Script s{HttpResponse{200, completion("x")}};
  auto cfg = endpoint();
  cfg.auth_token.reset();
  ::unsetenv(kApiTokenEnv);
  MllmClient(cfg, s.transport(), SleepLog{}.policy()).chat_complete(bundle("s"));
  EXPECT_TRUE(s.seen[0].headers.empty());
  ::setenv(kApiTokenEnv, "from-env", 1);
  MllmClient(cfg, s.transport(), SleepLog{}.policy()).chat_complete(bundle("s"));
  ::unsetenv(kApiTokenEnv);
  ASSERT_EQ(s.seen[1].headers.size(), 1u);
  EXPECT_EQ(s.seen[1].headers[0].second, "Bearer from-env");
}

TEST(MllmClient, SchemaMismatchIsNotRetried) {
  for (const std::string body : {"not json", R"({"choices": []})", R"({"choices": [{"message": {"content": 3}}]})"}) {
    Script s{HttpResponse{200, body}};
    const MllmClient client(endpoint(), s.transport(), SleepLog{}.policy());
    EXPECT_EQ(error_kind([&] { client.chat_complete(bundle("s")); }), ErrorKind::SchemaMismatch) << body;
    EXPECT_EQ(s.seen.size(), 1u);
  }
}

TEST(MllmClient, ConfigValidation) {
  auto bad = endpoint();
  bad.max_in_flight = 0;
  EXPECT_THROW(MllmClient(bad, Script{}.transport()), std::invalid_argument);
  bad = endpoint();
  bad.base_url = "mock/v1";
  EXPECT_THROW(MllmClient(bad, Script{}.transport()), std::invalid_argument);
  bad = endpoint();
  bad.timeout_seconds = 0;
  EXPECT_THROW(MllmClient(bad, Script{}.transport()), std::invalid_argument);
}

TEST(MllmClient, BatchRespectsInFlightCapAndOrder) {
  std::atomic<int> active{0}, peak{0};
  remote::Transport slow = [&](const HttpRequest& req) -> TransportResult {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    const auto text = nlohmann::json::parse(req.body)["messages"][1]["content"][0]["text"].get<std::string>();
    if (text == "compare s7") return HttpResponse{400, ""};
    return HttpResponse{200, completion("echo " + text)};
  };
  auto cfg = endpoint();
  cfg.max_in_flight = 3;
  const MllmClient client(cfg, slow, SleepLog{}.policy());
  std::vector<PromptBundle> bundles;
  for (int i = 0; i < 20; ++i) bundles.push_back(bundle("s" + std::to_string(i)));
  const auto out = client.batch_complete(bundles);
  EXPECT_LE(peak.load(), 3);
  EXPECT_GE(peak.load(), 2);
  ASSERT_EQ(out.size(), 20u);
  for (int i = 0; i < 20; ++i) {
    const auto id = "s" + std::to_string(i);
    EXPECT_EQ(out[i].id, id);
    if (i == 7) {
      ASSERT_EQ(out[i].result.index(), 1u);
      EXPECT_EQ(std::get<1>(out[i].result).sample_id(), "s7");
    } else {
      ASSERT_EQ(out[i].result.index(), 0u);
      EXPECT_EQ(std::get<0>(out[i].result), "echo compare " + id);
    }
  }
}

TEST(ScoreClient, RecoversFromTransientServerErrors) {
  Script s{HttpResponse{502, ""}, HttpResponse{500, ""}, HttpResponse{200, score_body("p1")}};
  SleepLog sleeps;
  const ScoreClient client({"http://mock:1/score"}, s.transport(), sleeps.policy());
  const auto qs = client.fetch_scores(score_sample("p1"));
  EXPECT_EQ(s.seen.size(), 3u);
  EXPECT_EQ(sleeps.waits.size(), 2u);
  EXPECT_EQ(s.seen[0].path, "/score");
  EXPECT_EQ(qs.find(ViewRole::AGlobal)->liqe, 4.0);
  EXPECT_EQ(qs.find(ViewRole::BGlobal)->qalign, 2.5);
  EXPECT_EQ(qs.find(ViewRole::ACrop), nullptr);
  const auto req = nlohmann::json::parse(s.seen[0].body);
  EXPECT_EQ(req["id"], "p1");
  EXPECT_EQ(req["images"].size(), 4u);
}

TEST(ScoreClient, MalformedResponsesAreSchemaMismatches) {
  const std::string bodies[] = {
      R"([{"id": "p1", "view": "c_global", "liqe": 1}])",
      R"([{"id": "other", "view": "a_global", "liqe": 1}])",
      R"([{"id": "p1", "view": "a_global"}])",
      R"({"id": "p1"})",
      "[",
  };
  for (const auto& body : bodies) {
    Script s{HttpResponse{200, body}};
    const ScoreClient client({"http://mock:1/score"}, s.transport(), SleepLog{}.policy());
    EXPECT_EQ(error_kind([&] { client.fetch_scores(score_sample("p1")); }), ErrorKind::SchemaMismatch) << body;
    EXPECT_EQ(s.seen.size(), 1u);
  }
}

TEST(ScoreClient, FetchAllKeepsFailuresPerSample) {
  remote::Transport t = [](const HttpRequest& req) -> TransportResult {
    const auto id = nlohmann::json::parse(req.body)["id"].get<std::string>();
    if (id == "p2") return HttpResponse{403, ""};
    return HttpResponse{200, score_body(id)};
  };
  const ScoreClient client({"http://mock:1/score"}, t, SleepLog{}.policy());
  const auto out = client.fetch_all({score_sample("p1"), score_sample("p2"), score_sample("p3")});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].index(), 0u);
  ASSERT_EQ(out[1].index(), 1u);
  EXPECT_EQ(std::get<1>(out[1]).kind(), ErrorKind::AuthFailure);
  EXPECT_EQ(std::get<1>(out[1]).sample_id(), "p2");
  EXPECT_EQ(out[2].index(), 0u);
}

TEST(HttpTransport, LoopbackServer) {
  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Authorization") != "Bearer tok") {
      res.status = 401;
      return;
    }
    const auto j = nlohmann::json::parse(req.body);
    res.set_content(completion("model=" + j["model"].get<std::string>()), "application/json");
  });
  server.Post("/slow/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    res.set_content(completion("late"), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto cfg = endpoint(0);
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  EXPECT_EQ(MllmClient(cfg).chat_complete(bundle("s")), "model=mock-model");

  cfg.auth_token = "wrong";
  EXPECT_EQ(error_kind([&] { MllmClient(cfg).chat_complete(bundle("s")); }), ErrorKind::AuthFailure);

  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/slow";
  cfg.timeout_seconds = 0.15;
  EXPECT_EQ(error_kind([&] { MllmClient(cfg).chat_complete(bundle("s")); }), ErrorKind::Timeout);

  server.stop();
  th.join();

  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  EXPECT_EQ(error_kind([&] { MllmClient(cfg).chat_complete(bundle("s")); }), ErrorKind::Connection);
}
