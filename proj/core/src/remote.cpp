#include "mmsurrogate/remote.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>
#include <thread>

#include "httplib.h"
#include "mmsurrogate/io.hpp"

extern char** environ;

namespace mmsurrogate {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// --- SubprocessTransport ----------------------------------------------------

SubprocessTransport::SubprocessTransport(std::string command) : command_(std::move(command)) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw TransportError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, sv[1], STDOUT_FILENO);

  std::string sh = "/bin/sh";
  std::string dash_c = "-c";
  char* argv[] = {sh.data(), dash_c.data(), command_.data(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(sv[1]);
  if (rc != 0) {
    ::close(sv[0]);
    throw TransportError("cannot start predictor '" + command_ + "': " + std::strerror(rc));
  }
  fd_ = sv[0];
  pid_ = pid;
}

SubprocessTransport::~SubprocessTransport() {
  if (fd_ >= 0) ::close(fd_);
  if (pid_ <= 0) return;
  // Closing the socket is the shutdown signal; give the child a moment.
  const auto deadline = Clock::now() + std::chrono::seconds(2);
  int status = 0;
  while (::waitpid(pid_, &status, WNOHANG) == 0) {
    if (Clock::now() > deadline) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

std::string SubprocessTransport::exchange(const std::string& line,
                                          std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  const std::string out = line + "\n";
  std::size_t sent = 0;
  while (sent < out.size()) {
    const ssize_t n = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("write to predictor '" + command_ + "' failed: " +
                           std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }

  for (;;) {
    if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
      std::string reply = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      if (!reply.empty() && reply.back() == '\r') reply.pop_back();
      return reply;
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) throw TimeoutError("predictor '" + command_ + "' timed out");
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char buf[65536];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError("read from predictor '" + command_ + "' failed: " +
                           std::strerror(errno));
    }
    if (n == 0) throw TransportError("predictor '" + command_ + "' closed the connection");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

// --- HttpTransport ----------------------------------------------------------

HttpTransport::HttpTransport(std::string url) : url_(std::move(url)) {
  const auto scheme = url_.find("://");
  if (scheme == std::string::npos) throw ConfigError({"predictor url must include a scheme: " + url_});
  const auto slash = url_.find('/', scheme + 3);
  origin_ = url_.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url_.substr(slash);
}

std::string HttpTransport::exchange(const std::string& line, std::chrono::milliseconds timeout) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  auto res = client.Post(path_, line + "\n", "application/x-ndjson");
  if (!res) {
    if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout) {
      throw TimeoutError("predictor at " + url_ + " timed out or dropped the connection (" +
                         httplib::to_string(res.error()) + ")");
    }
    throw TransportError("predictor at " + url_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("predictor at " + url_ + " returned HTTP " + std::to_string(res->status));
  }
  std::string body = res->body;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  return body;
}

// --- Messages ---------------------------------------------------------------

json to_json(const PredictionRequest& r) {
  return json{{"request_id", r.request_id},
              {"instance_id", r.instance_id},
              {"token_mask", r.token_mask},
              {"visual_mask", r.visual_mask},
              {"strategy", std::string(to_string(r.strategy))},
              {"strategy_seed", r.strategy_seed}};
}

PredictionRequest request_from_json(const json& j) {
  try {
    PredictionRequest r;
    r.request_id = j.at("request_id").get<std::string>();
    r.instance_id = j.at("instance_id").get<std::string>();
    r.token_mask = j.at("token_mask").get<std::vector<std::uint8_t>>();
    r.visual_mask = j.at("visual_mask").get<std::vector<std::uint8_t>>();
    r.strategy = parse_inactivation_kind(j.value("strategy", std::string("zero")));
    r.strategy_seed = j.value("strategy_seed", std::uint64_t{0});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed request: ") + e.what());
  }
}

json make_register_message(const Instance& instance) {
  return json{{"type", "register"}, {"instance", to_json(instance)}};
}

json make_predict_message(std::span<const PredictionRequest> requests) {
  json list = json::array();
  for (const auto& r : requests) list.push_back(to_json(r));
  return json{{"type", "predict"}, {"requests", list}};
}

namespace {

[[noreturn]] void throw_remote_error(const json& reply) {
  std::string id;
  if (reply.contains("request_id") && reply.at("request_id").is_string()) {
    id = reply.at("request_id").get<std::string>();
  }
  std::string message = "(no message)";
  if (reply.contains("message") && reply.at("message").is_string()) {
    message = reply.at("message").get<std::string>();
  }
  throw RemoteError(id, message);
}

std::string message_type(const json& reply) {
  if (!reply.is_object() || !reply.contains("type") || !reply.at("type").is_string()) {
    throw ProtocolError("reply is not a typed JSON object");
  }
  return reply.at("type").get<std::string>();
}

}  // namespace

std::vector<Prediction> parse_predictions_message(const json& reply,
                                                  std::span<const PredictionRequest> requests) {
  const std::string type = message_type(reply);
  if (type == "error") throw_remote_error(reply);
  if (type != "predictions") throw ProtocolError("expected a predictions reply, got '" + type + "'");
  if (!reply.contains("results") || !reply.at("results").is_array()) {
    throw ProtocolError("predictions reply lacks a results array");
  }
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < requests.size(); ++i) slot.emplace(requests[i].request_id, i);

  std::vector<std::optional<Prediction>> out(requests.size());
  for (const auto& r : reply.at("results")) {
    if (!r.is_object() || !r.contains("request_id") || !r.at("request_id").is_string()) {
      throw ProtocolError("result without a request_id");
    }
    const auto id = r.at("request_id").get<std::string>();
    const auto it = slot.find(id);
    if (it == slot.end()) throw ProtocolError("reply contains unknown request_id '" + id + "'");
    if (out[it->second]) throw ProtocolError("reply repeats request_id '" + id + "'");
    if (!r.contains("probabilities") || !r.at("probabilities").is_object()) {
      throw ProtocolError("result '" + id + "' lacks a probabilities object");
    }
    Prediction p;
    for (const auto& [label, v] : r.at("probabilities").items()) {
      if (!v.is_number()) throw ProtocolError("result '" + id + "': non-numeric probability");
      const double x = v.get<double>();
      if (!(x >= 0.0 && x <= 1.0)) {
        throw ProtocolError("result '" + id + "': probability for '" + label +
                            "' outside [0, 1]");
      }
      p.probabilities[label] = x;
    }
    out[it->second] = std::move(p);
  }
  std::vector<Prediction> result;
  result.reserve(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i]) {
      throw ProtocolError("reply is missing request_id '" + requests[i].request_id + "'");
    }
    result.push_back(std::move(*out[i]));
  }
  return result;
}

// --- RemotePredictor --------------------------------------------------------

RemotePredictor::RemotePredictor(std::unique_ptr<Transport> transport, RemoteOptions options)
    : transport_(std::move(transport)), options_(options) {
  if (!transport_) throw ArgumentError("RemotePredictor needs a transport");
  if (options_.batch_size < 1) throw ConfigError({"batch_size must be >= 1"});
}

json RemotePredictor::roundtrip(const json& message) {
  const std::string reply = transport_->exchange(message.dump(), options_.timeout);
  try {
    return json::parse(reply);
  } catch (const json::parse_error& e) {
    throw ProtocolError("malformed reply from " + transport_->describe() + ": " + e.what());
  }
}

std::vector<Prediction> RemotePredictor::predict(const Instance& instance,
                                                 std::span<const PredictionRequest> requests) {
  if (requests.empty()) return {};
  for (const auto& r : requests) validate_request(r, instance);

  if (!registered_.contains(instance.id())) {
    const json reply = roundtrip(make_register_message(instance));
    const std::string type = message_type(reply);
    if (type == "error") throw_remote_error(reply);
    if (type != "registered" || reply.value("instance_id", std::string()) != instance.id()) {
      throw ProtocolError("registration of '" + instance.id() + "' was not acknowledged");
    }
    registered_.insert(instance.id());
  }

  std::vector<Prediction> out;
  out.reserve(requests.size());
  for (std::size_t start = 0; start < requests.size(); start += options_.batch_size) {
    const auto batch = requests.subspan(start, std::min(options_.batch_size, requests.size() - start));
    auto preds = parse_predictions_message(roundtrip(make_predict_message(batch)), batch);
    std::move(preds.begin(), preds.end(), std::back_inserter(out));
  }
  return out;
}

// --- ProtocolServer ---------------------------------------------------------

std::string ProtocolServer::handle_line(const std::string& line) {
  ++line_number_;
  auto error = [&](const std::string& id, const std::string& message) {
    json e{{"type", "error"}, {"message", message}};
    e["request_id"] = id.empty() ? json(nullptr) : json(id);
    return e.dump();
  };
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::parse_error& e) {
    return error("", "line " + std::to_string(line_number_) + ": malformed JSON: " + e.what());
  }
  std::string type;
  try {
    type = message_type(msg);
  } catch (const ProtocolError& e) {
    return error("", "line " + std::to_string(line_number_) + ": " + e.what());
  }

  if (type == "register") {
    try {
      Instance inst = instance_from_json(msg.at("instance"));
      const std::string id = inst.id();
      std::erase_if(instances_, [&](const Instance& i) { return i.id() == id; });
      instances_.push_back(std::move(inst));
      return json{{"type", "registered"}, {"instance_id", id}}.dump();
    } catch (const std::exception& e) {
      return error("", "line " + std::to_string(line_number_) + ": " + e.what());
    }
  }
  if (type != "predict") {
    return error("", "line " + std::to_string(line_number_) + ": unknown message type '" + type + "'");
  }
  if (!msg.contains("requests") || !msg.at("requests").is_array()) {
    return error("", "line " + std::to_string(line_number_) + ": predict without requests");
  }
  json results = json::array();
  for (const auto& rj : msg.at("requests")) {
    PredictionRequest req;
    try {
      req = request_from_json(rj);
    } catch (const ParseError& e) {
      return error("", "line " + std::to_string(line_number_) + ": " + e.what());
    }
    const auto it = std::find_if(instances_.begin(), instances_.end(),
                                 [&](const Instance& i) { return i.id() == req.instance_id; });
    if (it == instances_.end()) {
      return error(req.request_id, "instance '" + req.instance_id + "' is not registered");
    }
    try {
      const auto preds = predictor_.predict(*it, std::span<const PredictionRequest>(&req, 1));
      results.push_back({{"request_id", req.request_id}, {"probabilities", preds.at(0).probabilities}});
    } catch (const std::exception& e) {
      return error(req.request_id, e.what());
    }
  }
  return json{{"type", "predictions"}, {"results", results}}.dump();
}

// --- Factory ----------------------------------------------------------------

std::unique_ptr<Predictor> open_predictor(const std::string& spec, RemoteOptions options) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw ConfigError({"predictor must be synthetic:<model-path>, cmd:<argv> or url:<endpoint>, got '" +
                       spec + "'"});
  }
  const std::string scheme = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (rest.empty()) throw ConfigError({"predictor '" + spec + "' has an empty target"});
  if (scheme == "synthetic") {
    return std::make_unique<SyntheticPredictor>(load_model(rest), spec);
  }
  if (scheme == "cmd") {
    return std::make_unique<RemotePredictor>(std::make_unique<SubprocessTransport>(rest), options);
  }
  if (scheme == "url") {
    return std::make_unique<RemotePredictor>(std::make_unique<HttpTransport>(rest), options);
  }
  throw ConfigError({"unknown predictor scheme '" + scheme + "'"});
}

}  // namespace mmsurrogate
