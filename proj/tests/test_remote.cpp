#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <thread>

#include "httplib.h"
#include "mmsurrogate/errors.hpp"
#include "mmsurrogate/explain.hpp"
#include "mmsurrogate/io.hpp"
#include "mmsurrogate/remote.hpp"
#include "support/support.hpp"

using namespace mmsurrogate;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Talks to an in-process ProtocolServer and keeps a transcript.
class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(Predictor& p) : server_(p) {}
  std::string exchange(const std::string& line, std::chrono::milliseconds) override {
    std::string reply = server_.handle_line(line);
    transcript.emplace_back(line, reply);
    return reply;
  }
  std::string describe() const override { return "loopback"; }
  std::vector<std::pair<std::string, std::string>> transcript;

 private:
  ProtocolServer server_;
};

struct Fixture {
  testsupport::HotFixture fx = testsupport::make_hot_fixture(15, 12, 3, 3, 2.0, -1.0, 42);
  fs::path dir;
  fs::path model_path;

  Fixture() {
    dir = fs::temp_directory_path() / ("mmsurrogate-remote-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    model_path = dir / "model.json";
    save_model(model_path, fx.model);
  }
  ~Fixture() { fs::remove_all(dir); }

  std::string command(const std::string& flag = "") const {
    std::string c = std::string(MMSURROGATE_STDIO_PREDICTOR) + " " + model_path.string();
    return flag.empty() ? c : c + " " + flag;
  }
};

std::vector<PredictionRequest> random_requests(const Instance& inst, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<PredictionRequest> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].request_id = "req-" + std::to_string(i);
    out[i].instance_id = inst.id();
    for (std::size_t j = 0; j < inst.unique_words().size(); ++j) out[i].token_mask.push_back(gen() & 1);
    for (std::size_t j = 0; j < inst.box_count(); ++j) out[i].visual_mask.push_back(gen() & 1);
    out[i].strategy_seed = gen();
  }
  return out;
}

void expect_conforms(Predictor& remote, const Fixture& f) {
  const auto reqs = random_requests(f.fx.instance, 100, 9);
  const auto got = remote.predict(f.fx.instance, reqs);
  ASSERT_EQ(got.size(), reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const auto want = synthetic_predict(f.fx.model, f.fx.instance, reqs[i].token_mask, reqs[i].visual_mask);
    for (const auto& [label, p] : want.probabilities) {
      EXPECT_NEAR(got[i].probabilities.at(label), p, 1e-9);
    }
  }
}

}  // namespace

// --- messages ---

TEST(Messages, RegisterCarriesInstance) {
  const auto inst = testsupport::make_instance(3, 2, 2, 1);
  const auto m = make_register_message(inst);
  EXPECT_EQ(m.at("type"), "register");
  EXPECT_EQ(instance_from_json(m.at("instance")), inst);
}

TEST(Messages, PredictCarriesMasksOnly) {
  const auto inst = testsupport::make_instance(3, 2, 2, 1);
  const auto reqs = random_requests(inst, 2, 1);
  const auto m = make_predict_message(reqs);
  EXPECT_EQ(m.at("type"), "predict");
  ASSERT_EQ(m.at("requests").size(), 2u);
  const auto& r = m.at("requests")[0];
  for (const char* key : {"request_id", "instance_id", "token_mask", "visual_mask", "strategy", "strategy_seed"}) {
    EXPECT_TRUE(r.contains(key)) << key;
  }
  EXPECT_FALSE(r.contains("instance"));
  EXPECT_EQ(request_from_json(r), reqs[0]);
}

TEST(Messages, RequestRoundTripKeepsFullSeed) {
  PredictionRequest r{"x", "i", {1, 0}, {0}, InactivationKind::randomize, 0xfedcba9876543210ULL};
  EXPECT_EQ(request_from_json(to_json(r)), r);
}

TEST(ParsePredictions, MissingIdNamed) {
  const auto inst = testsupport::make_instance(3, 2, 2, 1);
  const auto reqs = random_requests(inst, 2, 1);
  const json reply{{"type", "predictions"},
                   {"results", {{{"request_id", "req-0"}, {"probabilities", {{"nodule", 0.5}}}}}}};
  try {
    parse_predictions_message(reply, reqs);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("req-1"), std::string::npos) << e.what();
  }
}

TEST(ParsePredictions, OrderFollowsRequestsNotReply) {
  const auto inst = testsupport::make_instance(3, 2, 2, 1);
  const auto reqs = random_requests(inst, 2, 1);
  const json reply{{"type", "predictions"},
                   {"results",
                    {{{"request_id", "req-1"}, {"probabilities", {{"nodule", 0.25}}}},
                     {{"request_id", "req-0"}, {"probabilities", {{"nodule", 0.75}}}}}}};
  const auto p = parse_predictions_message(reply, reqs);
  EXPECT_EQ(p[0].probabilities.at("nodule"), 0.75);
  EXPECT_EQ(p[1].probabilities.at("nodule"), 0.25);
}

TEST(ParsePredictions, RejectsUnknownDuplicateAndOutOfRange) {
  const auto inst = testsupport::make_instance(3, 2, 2, 1);
  const auto reqs = random_requests(inst, 1, 1);
  auto result = [](const std::string& id, double p) {
    return json{{"request_id", id}, {"probabilities", {{"nodule", p}}}};
  };
  EXPECT_THROW(parse_predictions_message(json{{"type", "predictions"}, {"results", {result("zzz", 0.5)}}}, reqs),
               ProtocolError);
  EXPECT_THROW(parse_predictions_message(
                   json{{"type", "predictions"}, {"results", {result("req-0", 0.5), result("req-0", 0.5)}}}, reqs),
               ProtocolError);
  EXPECT_THROW(parse_predictions_message(json{{"type", "predictions"}, {"results", {result("req-0", 1.5)}}}, reqs),
               ProtocolError);
  EXPECT_THROW(parse_predictions_message(json{{"type", "bogus"}}, reqs), ProtocolError);
}

TEST(ParsePredictions, ErrorReplyRaisesRemoteError) {
  const auto inst = testsupport::make_instance(3, 2, 2, 1);
  const auto reqs = random_requests(inst, 1, 1);
  try {
    parse_predictions_message(json{{"type", "error"}, {"request_id", "req-0"}, {"message", "boom"}}, reqs);
    FAIL() << "expected RemoteError";
  } catch (const RemoteError& e) {
    EXPECT_EQ(e.request_id(), "req-0");
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

// --- reference server ---

TEST(ProtocolServer, EmptyBatchGivesEmptyResults) {
  const auto fx = testsupport::make_hot_fixture(4, 2, 1, 1, 1.0, 0.0, 1);
  SyntheticPredictor p(fx.model);
  ProtocolServer server(p);
  const auto reply = json::parse(server.handle_line(json{{"type", "predict"}, {"requests", json::array()}}.dump()));
  EXPECT_EQ(reply.at("type"), "predictions");
  EXPECT_TRUE(reply.at("results").empty());
}

TEST(ProtocolServer, MalformedLineNamesLineNumberAndContinues) {
  const auto fx = testsupport::make_hot_fixture(4, 2, 1, 1, 1.0, 0.0, 1);
  SyntheticPredictor p(fx.model);
  ProtocolServer server(p);
  server.handle_line(make_register_message(fx.instance).dump());
  const auto bad = json::parse(server.handle_line("{not json"));
  EXPECT_EQ(bad.at("type"), "error");
  EXPECT_NE(bad.at("message").get<std::string>().find("line 2"), std::string::npos);
  const auto reqs = random_requests(fx.instance, 3, 2);
  const auto ok = json::parse(server.handle_line(make_predict_message(reqs).dump()));
  EXPECT_EQ(ok.at("results").size(), 3u);
}

TEST(ProtocolServer, UnregisteredInstanceIsAnError) {
  const auto fx = testsupport::make_hot_fixture(4, 2, 1, 1, 1.0, 0.0, 1);
  SyntheticPredictor p(fx.model);
  ProtocolServer server(p);
  const auto reqs = random_requests(fx.instance, 1, 2);
  const auto reply = json::parse(server.handle_line(make_predict_message(reqs).dump()));
  EXPECT_EQ(reply.at("type"), "error");
  EXPECT_EQ(reply.at("request_id"), "req-0");
}

// --- remote predictor ---

TEST(RemotePredictor, LoopbackConformance) {
  Fixture f;
  SyntheticPredictor inner(f.fx.model);
  auto transport = std::make_unique<LoopbackTransport>(inner);
  auto* raw = transport.get();
  RemotePredictor remote(std::move(transport), {std::chrono::milliseconds(1000), 16});
  expect_conforms(remote, f);
  // One register, then ceil(100 / 16) predict messages.
  ASSERT_EQ(raw->transcript.size(), 8u);
  EXPECT_EQ(json::parse(raw->transcript[0].first).at("type"), "register");
  EXPECT_TRUE(remote.predict(f.fx.instance, {}).empty());
}

TEST(RemotePredictor, TranscriptReplaysExactly) {
  Fixture f;
  SyntheticPredictor inner(f.fx.model);
  auto transport = std::make_unique<LoopbackTransport>(inner);
  auto* raw = transport.get();
  RemotePredictor remote(std::move(transport), {std::chrono::milliseconds(1000), 7});
  auto config = ExplainerConfig{};
  config.samples = 30;
  config.batch_size = 7;
  explain_simultaneous(f.fx.instance, "nodule", remote, config);
  ASSERT_FALSE(raw->transcript.empty());

  SyntheticPredictor fresh(f.fx.model);
  ProtocolServer replay(fresh);
  for (const auto& [sent, reply] : raw->transcript) {
    EXPECT_EQ(replay.handle_line(sent), reply);
  }
}

TEST(SubprocessTransport, Conformance) {
  Fixture f;
  auto remote = open_predictor("cmd:" + f.command());
  expect_conforms(*remote, f);
  EXPECT_EQ(remote->identifier(), "cmd:" + f.command());
}

TEST(SubprocessTransport, ExplanationMatchesInProcess) {
  Fixture f;
  ExplainerConfig config;
  config.samples = 120;
  config.seed = 5;
  config.inactivation = InactivationKind::mean_std;
  SyntheticPredictor local(f.fx.model);
  auto remote = open_predictor("cmd:" + f.command());
  auto a = explain_separate(f.fx.instance, "nodule", local, config);
  auto b = explain_separate(f.fx.instance, "nodule", *remote, config);
  a.provenance.predictor = b.provenance.predictor;
  EXPECT_EQ(a, b);
}

TEST(SubprocessTransport, MissingIdIsProtocolError) {
  Fixture f;
  auto remote = open_predictor("cmd:" + f.command("--drop-first"));
  const auto reqs = random_requests(f.fx.instance, 3, 1);
  try {
    remote->predict(f.fx.instance, reqs);
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("req-0"), std::string::npos) << e.what();
  }
}

TEST(SubprocessTransport, SilentPredictorTimesOut) {
  Fixture f;
  auto remote = open_predictor("cmd:" + f.command("--silent"), {std::chrono::milliseconds(200), 32});
  const auto reqs = random_requests(f.fx.instance, 1, 1);
  EXPECT_THROW(remote->predict(f.fx.instance, reqs), TimeoutError);
}

TEST(SubprocessTransport, GarbageReplyIsProtocolError) {
  Fixture f;
  auto remote = open_predictor("cmd:" + f.command("--garbage"));
  const auto reqs = random_requests(f.fx.instance, 1, 1);
  EXPECT_THROW(remote->predict(f.fx.instance, reqs), ProtocolError);
}

TEST(SubprocessTransport, ExitedPredictorIsTransportError) {
  Fixture f;
  auto remote = open_predictor("cmd:exit 0", {std::chrono::milliseconds(2000), 32});
  const auto reqs = random_requests(f.fx.instance, 1, 1);
  EXPECT_THROW(remote->predict(f.fx.instance, reqs), PredictorError);
}

TEST(HttpTransport, Conformance) {
  Fixture f;
  SyntheticPredictor inner(f.fx.model);
  ProtocolServer server(inner);
  httplib::Server http;
  http.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    res.set_content(server.handle_line(req.body), "application/x-ndjson");
  });
  const int port = http.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { http.listen_after_bind(); });
  http.wait_until_ready();
  {
    auto remote = open_predictor("url:http://127.0.0.1:" + std::to_string(port) + "/predict");
    expect_conforms(*remote, f);
  }
  http.stop();
  t.join();
}

TEST(HttpTransport, UnreachableIsTransportError) {
  Fixture f;
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  auto remote = open_predictor("url:http://127.0.0.1:" + std::to_string(port) + "/predict",
                               {std::chrono::milliseconds(500), 32});
  const auto reqs = random_requests(f.fx.instance, 1, 1);
  EXPECT_THROW(remote->predict(f.fx.instance, reqs), PredictorError);
}

TEST(OpenPredictor, SpecsParsed) {
  Fixture f;
  auto p = open_predictor("synthetic:" + f.model_path.string());
  EXPECT_EQ(p->identifier(), "synthetic:" + f.model_path.string());
  EXPECT_THROW(open_predictor("grpc:somewhere"), ConfigError);
  EXPECT_THROW(open_predictor("noscheme"), ConfigError);
  EXPECT_THROW(open_predictor("synthetic:"), ConfigError);
}
