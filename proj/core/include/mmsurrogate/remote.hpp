#pragma once
// Client and reference server for the newline-delimited JSON predictor
// protocol:
//
//   -> {"type":"register","instance":{...}}
//   <- {"type":"registered","instance_id":"..."}
//   -> {"type":"predict","requests":[{"request_id","instance_id","token_mask",
//        "visual_mask","strategy","strategy_seed"}, ...]}
//   <- {"type":"predictions","results":[{"request_id","probabilities":{...}}, ...]}
//   <- {"type":"error","request_id":"...","message":"..."}
//
// Exactly one reply line is read per message sent.

#include <chrono>
#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsurrogate/model.hpp"
#include "mmsurrogate/predictor.hpp"

namespace mmsurrogate {

// Sends one line, returns one reply line (without the trailing newline).
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string exchange(const std::string& line, std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

// Runs `/bin/sh -c command` with stdin/stdout connected to a socket pair.
class SubprocessTransport final : public Transport {
 public:
  explicit SubprocessTransport(std::string command);
  ~SubprocessTransport() override;

  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  std::string exchange(const std::string& line, std::chrono::milliseconds timeout) override;
  std::string describe() const override { return "cmd:" + command_; }

 private:
  std::string command_;
  int fd_ = -1;
  int pid_ = -1;
  std::string pending_;
};

// POSTs each message as the body to `url`; the response body is the reply.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string url);

  std::string exchange(const std::string& line, std::chrono::milliseconds timeout) override;
  std::string describe() const override { return "url:" + url_; }

 private:
  std::string url_;
  std::string origin_;
  std::string path_;
};

struct RemoteOptions {
  std::chrono::milliseconds timeout{60'000};
  std::size_t batch_size = 32;
};

class RemotePredictor final : public Predictor {
 public:
  RemotePredictor(std::unique_ptr<Transport> transport, RemoteOptions options = {});

  std::string identifier() const override { return transport_->describe(); }

  // Registers the instance on first use, then sends mask-only batches.
  std::vector<Prediction> predict(const Instance& instance,
                                  std::span<const PredictionRequest> requests) override;

 private:
  nlohmann::json roundtrip(const nlohmann::json& message);

  std::unique_ptr<Transport> transport_;
  RemoteOptions options_;
  std::set<std::string> registered_;
};

nlohmann::json make_register_message(const Instance& instance);
nlohmann::json make_predict_message(std::span<const PredictionRequest> requests);

// Matches results to requests by request_id. Throws ProtocolError on a
// malformed reply, a missing or unknown id, or a duplicate; RemoteError on an
// error message.
std::vector<Prediction> parse_predictions_message(const nlohmann::json& reply,
                                                  std::span<const PredictionRequest> requests);

nlohmann::json to_json(const PredictionRequest& request);
PredictionRequest request_from_json(const nlohmann::json& j);

// Reference server side of the protocol around any in-process predictor.
// Malformed lines produce an error reply naming the line number; the server
// keeps going.
class ProtocolServer {
 public:
  explicit ProtocolServer(Predictor& predictor) : predictor_(predictor) {}

  std::string handle_line(const std::string& line);

 private:
  Predictor& predictor_;
  std::vector<Instance> instances_;
  std::size_t line_number_ = 0;
};

// Parses "synthetic:<model-path>", "cmd:<command line>" or "url:<endpoint>".
std::unique_ptr<Predictor> open_predictor(const std::string& spec, RemoteOptions options = {});

}  // namespace mmsurrogate
