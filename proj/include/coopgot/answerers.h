#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "coopgot/answer.h"
#include "coopgot/curation.h"
#include "coopgot/scene.h"
#include "coopgot/visibility.h"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace coopgot {

// Everything an answerer may look at for one node. `gt` is only for the
// oracle; `scene` stands in for the shared perception features.
struct AnswerRequest {
  std::string uid;
  QType qtype = QType::kQ1;
  std::string question;
  std::string context;
  const nlohmann::json* payload = nullptr;
  const Scene* scene = nullptr;
  double t = 0.0;
  std::string ego;
  const QaPair* curated = nullptr;
};

class Answerer {
 public:
  virtual ~Answerer() = default;
  virtual std::string name() const = 0;
  // Returns answer text. Must be safe to call concurrently.
  virtual std::string answer(const AnswerRequest& req) = 0;
};

class OracleAnswerer : public Answerer {
 public:
  std::string name() const override { return "oracle"; }
  // Throws MissingSample when the request carries no curated pair.
  std::string answer(const AnswerRequest& req) override;
};

// Rule-based stand-in that only uses detections from both CAVs at t and
// t - 0.5 s, the payload, and parsed context text.
class HeuristicAnswerer : public Answerer {
 public:
  explicit HeuristicAnswerer(CurationConfig cfg = {}, DetectorConfig detector = {})
      : cfg_(cfg), detector_(detector) {}
  std::string name() const override { return "heuristic"; }
  // Throws MissingDetections.
  std::string answer(const AnswerRequest& req) override;
  Answer answer_structured(const AnswerRequest& req) const;

 private:
  CurationConfig cfg_;
  DetectorConfig detector_;
};

// Waypoints for a constant speed, constant yaw-rate rollout matching the
// given action classes.
Waypoints6 rollout_action(const ActionClass& a, const CurationConfig& cfg);
double speed_class_midpoint(SpeedClass s, const CurationConfig& cfg);
double steer_class_midpoint_deg(SteerClass s, const CurationConfig& cfg);

class NoisyAnswerer : public Answerer {
 public:
  NoisyAnswerer(std::shared_ptr<Answerer> inner, double sigma_pos, double flip_prob, std::uint64_t seed);
  std::string name() const override { return "noisy(" + inner_->name() + ")"; }
  std::string answer(const AnswerRequest& req) override;
  Answer perturb(const Answer& a, const std::string& uid) const;

 private:
  std::shared_ptr<Answerer> inner_;
  double sigma_;
  double flip_;
  std::uint64_t seed_;
};

inline constexpr std::size_t kMaxBodyBytes = 64 * 1024;

// HTTP client for POST /answer. Failures throw ExternalError.
class ExternalAnswerer : public Answerer {
 public:
  ExternalAnswerer(std::string endpoint, double timeout_s = 30.0, int max_inflight = 4);
  std::string name() const override { return "external"; }
  std::string answer(const AnswerRequest& req) override;
  int attempts() const { return attempts_.load(); }

 private:
  std::string attempt(const std::string& body);
  std::string host_;
  int port_ = 80;
  double timeout_s_;
  std::counting_semaphore<1024> slots_;
  std::atomic<int> attempts_{0};
};

enum class StubMode { kOracle, kEcho, kMalformed, kGarbage };
StubMode parse_stub_mode(const std::string& s);

// Reference answer server: oracle answers from a QA file, echo of the
// context, unparseable prose, or a non-JSON body.
class StubServer {
 public:
  StubServer(StubMode mode, std::vector<QaPair> pairs = {});
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks until stop() is called from another thread or a signal.
  void listen_blocking(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_.load(); }

 private:
  void install_routes();
  StubMode mode_;
  std::map<std::string, std::string> answers_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
};

}  // namespace coopgot
