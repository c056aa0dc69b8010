#include "coopgot/answerers.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "coopgot/errors.h"
#include "coopgot/rng.h"
#include "httplib.h"

namespace coopgot {
namespace {

// Detections near the origin are the ego itself as seen by the other CAV.
constexpr double kSelfRadius = 0.5;
// Two detections closer than this are the same object.
constexpr double kSameObject = 0.5;
// Association gate between t - 0.5 s and t (12 m/s max speed -> 6 m).
constexpr double kAssocGate = 7.0;
constexpr double kFullTurnCapDeg = 90.0;
constexpr int kMaxDegradeSteps = 4;

struct Seen {
  Vec2 p;
  double length;
  double width;
};

std::vector<Seen> seen_by(const Scene& scene, double t, const std::string& cav, const Pose2& ego_pose,
                          const DetectorConfig& det) {
  std::vector<Seen> out;
  for (const Detection& d : detect(scene, t, cav, det).detections) {
    const Vec2 p = to_ego_frame(d.center.position(), ego_pose);
    if (p.norm() < kSelfRadius) continue;
    out.push_back({p, d.length, d.width});
  }
  return out;
}

bool near_any(Vec2 p, const std::vector<Vec2>& pts, double r) {
  return std::any_of(pts.begin(), pts.end(), [&](Vec2 q) { return distance(p, q) <= r; });
}

struct Candidate {
  Vec2 p;
  double d;
};

std::vector<Vec2> nearest(std::vector<Candidate> c, int k) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.d, a.p.x, a.p.y) < std::tie(b.d, b.p.x, b.p.y);
  });
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < c.size() && i < static_cast<std::size_t>(k); ++i) out.push_back(c[i].p);
  return out;
}

Waypoints6 read_waypoints(const nlohmann::json& j) {
  Waypoints6 w;
  for (std::size_t i = 0; i < 6; ++i) w[i] = {j.at(i).at(0).get<double>(), j.at(i).at(1).get<double>()};
  return w;
}

// Context lines parsed back into answers; unparseable lines are dropped.
std::vector<Answer> parse_context(const std::string& context) {
  static const QType kProbe[] = {QType::kQ4, QType::kQ2, QType::kQ5, QType::kQ6, QType::kQ8, QType::kQ9};
  std::vector<Answer> out;
  std::istringstream in(context);
  std::string line;
  while (std::getline(in, line)) {
    for (QType q : kProbe) {
      try {
        out.push_back(parse_answer(line, q));
        break;
      } catch (const ParseError&) {
      }
    }
  }
  return out;
}

template <typename T>
std::vector<const T*> find_all(const std::vector<Answer>& ctx) {
  std::vector<const T*> out;
  for (const auto& a : ctx) {
    if (auto* v = std::get_if<T>(&a.value)) out.push_back(v);
  }
  return out;
}

}  // namespace

std::string OracleAnswerer::answer(const AnswerRequest& req) {
  if (req.curated == nullptr) throw MissingSample("no curated pair for " + req.uid);
  return render_answer(req.curated->gt);
}

double speed_class_midpoint(SpeedClass s, const CurationConfig& cfg) {
  const auto& b = cfg.speed_bounds;
  switch (s) {
    case SpeedClass::kFast:
      return b[3] + 0.5 * (b[3] - b[2]);
    case SpeedClass::kModerate:
      return 0.5 * (b[2] + b[3]);
    case SpeedClass::kSlow:
      return 0.5 * (b[1] + b[2]);
    case SpeedClass::kVerySlow:
      return 0.5 * (b[0] + b[1]);
    case SpeedClass::kStop:
      return 0.0;
  }
  return 0.0;
}

double steer_class_midpoint_deg(SteerClass s, const CurationConfig& cfg) {
  const auto& b = cfg.steer_bounds_deg;
  const double slight = 0.5 * (b[0] + b[1]);
  const double full = 0.5 * (b[1] + kFullTurnCapDeg);
  switch (s) {
    case SteerClass::kLeft:
      return full;
    case SteerClass::kSlightlyLeft:
      return slight;
    case SteerClass::kStraight:
      return 0.0;
    case SteerClass::kSlightlyRight:
      return -slight;
    case SteerClass::kRight:
      return -full;
  }
  return 0.0;
}

Waypoints6 rollout_action(const ActionClass& a, const CurationConfig& cfg) {
  const double v = speed_class_midpoint(a.speed, cfg);
  const double horizon = 6 * cfg.waypoint_dt;
  const double omega = deg_to_rad(steer_class_midpoint_deg(a.steer, cfg)) / horizon;
  Waypoints6 w;
  for (int k = 1; k <= 6; ++k) {
    const double tau = k * cfg.waypoint_dt;
    if (std::abs(omega) < 1e-9) {
      w[k - 1] = {v * tau, 0.0};
    } else {
      w[k - 1] = {v / omega * std::sin(omega * tau), v / omega * (1.0 - std::cos(omega * tau))};
    }
  }
  return w;
}

std::string HeuristicAnswerer::answer(const AnswerRequest& req) { return render_answer(answer_structured(req)); }

Answer HeuristicAnswerer::answer_structured(const AnswerRequest& req) const {
  if (req.scene == nullptr || req.payload == nullptr) throw MissingDetections("no scene for " + req.uid);
  const Scene& scene = *req.scene;
  const double t_prev = req.t - cfg_.waypoint_dt;
  if (t_prev < -1e-9) throw MissingDetections("no previous timestep for " + req.uid);

  const Pose2 ego_pose = scene.agent(req.ego).pose_at(req.t);
  const std::string other = [&] {
    for (const auto& c : scene.cavs) {
      if (c.id != req.ego) return c.id;
    }
    throw MissingDetections("no cooperating CAV in " + scene.seq_id);
  }();
  const Waypoints6 ref = read_waypoints(req.payload->at("reference"));
  const double radius = cfg_.notable_radius;

  std::vector<Seen> own_now, other_now, fused_prev;
  try {
    own_now = seen_by(scene, req.t, req.ego, ego_pose, detector_);
    other_now = seen_by(scene, req.t, other, ego_pose, detector_);
    for (const auto& s : seen_by(scene, t_prev, req.ego, ego_pose, detector_)) fused_prev.push_back(s);
    for (const auto& s : seen_by(scene, t_prev, other, ego_pose, detector_)) fused_prev.push_back(s);
  } catch (const OutOfRange& e) {
    throw MissingDetections(e.what());
  }
  std::vector<Vec2> own_pts;
  for (const auto& s : own_now) own_pts.push_back(s.p);

  auto visible = [&] {
    std::vector<Candidate> c;
    for (const auto& s : own_now) {
      const double d = distance_to_reference(s.p, ref, cfg_.segment_distance);
      if (d <= radius) c.push_back({s.p, d});
    }
    return nearest(c, cfg_.k_max);
  };
  auto invisible = [&] {
    std::vector<Candidate> c;
    for (const auto& s : other_now) {
      if (near_any(s.p, own_pts, kSameObject)) continue;
      const double d = distance_to_reference(s.p, ref, cfg_.segment_distance);
      if (d <= radius) c.push_back({s.p, d});
    }
    return nearest(c, cfg_.k_max);
  };
  auto merge_lists = [&](const std::vector<std::vector<Vec2>>& lists) {
    ObjectList out;
    for (const auto& l : lists) {
      for (Vec2 p : l) {
        if (!near_any(p, out.objects, cfg_.match_radius)) out.objects.push_back(p);
      }
    }
    return out;
  };
  const std::vector<Answer> ctx = parse_context(req.context);

  auto predict = [&](const std::vector<Vec2>& objects) {
    std::vector<Vec2> now_pts = own_pts;
    for (const auto& s : other_now) now_pts.push_back(s.p);
    PredictionList out;
    for (Vec2 p : objects) {
      Vec2 start = p;
      double best = 1.0;
      for (Vec2 q : now_pts) {
        if (distance(p, q) < best) {
          best = distance(p, q);
          start = q;
        }
      }
      Vec2 vel{0.0, 0.0};
      double gate = kAssocGate;
      for (const auto& s : fused_prev) {
        const double d = distance(start, s.p);
        if (d < gate) {
          gate = d;
          vel = (1.0 / cfg_.waypoint_dt) * (start - s.p);
        }
      }
      PredictionEntry e;
      e.start = start;
      for (int k = 1; k <= 6; ++k) e.waypoints[k - 1] = start + (k * cfg_.waypoint_dt) * vel;
      e.motion = classify_motion(e.waypoints, cfg_);
      out.entries.push_back(e);
    }
    return out;
  };

  switch (req.qtype) {
    case QType::kQ1:
      return {req.qtype, ObjectList{visible()}};
    case QType::kQ2: {
      std::vector<Candidate> c;
      for (const auto& s : own_now) c.push_back({s.p, s.p.norm()});
      return {req.qtype, ObjectList{nearest(c, cfg_.k_max)}};
    }
    case QType::kQ3:
      return {req.qtype, ObjectList{invisible()}};
    case QType::kQ4: {
      const auto lists = find_all<ObjectList>(ctx);
      if (lists.empty()) return {req.qtype, merge_lists({visible(), invisible()})};
      std::vector<std::vector<Vec2>> parts;
      for (const auto* l : lists) parts.push_back(l->objects);
      return {req.qtype, merge_lists(parts)};
    }
    case QType::kQ5: {
      const auto lists = find_all<ObjectList>(ctx);
      std::vector<Vec2> objects;
      if (lists.empty()) {
        objects = merge_lists({visible(), invisible()}).objects;
      } else {
        for (const auto* l : lists) objects.insert(objects.end(), l->objects.begin(), l->objects.end());
      }
      return {req.qtype, predict(objects)};
    }
    case QType::kQ6: {
      CavNotability out;
      if (req.payload->contains("cavs")) {
        for (const auto& c : req.payload->at("cavs")) {
          const Vec2 p{c.at("position").at(0).get<double>(), c.at("position").at(1).get<double>()};
          out.entries.push_back({c.at("cav_id").get<std::string>(),
                                 distance_to_reference(p, ref, cfg_.segment_distance) <= radius});
        }
      }
      return {req.qtype, out};
    }
    case QType::kQ7: {
      PredictionList q5;
      for (const auto* p : find_all<PredictionList>(ctx)) {
        q5.entries.insert(q5.entries.end(), p->entries.begin(), p->entries.end());
      }
      std::vector<CavPlan> plans;
      const auto flags = find_all<CavNotability>(ctx);
      if (req.payload->contains("cavs")) {
        for (const auto& c : req.payload->at("cavs")) {
          CavPlan plan;
          plan.cav_id = c.at("cav_id").get<std::string>();
          plan.position = {c.at("position").at(0).get<double>(), c.at("position").at(1).get<double>()};
          plan.plan = read_waypoints(c.at("plan"));
          for (const auto* f : flags) {
            for (const auto& e : f->entries) {
              if (e.cav_id == plan.cav_id) plan.notable = e.notable;
            }
          }
          plans.push_back(plan);
        }
      }
      return {req.qtype, merge_prediction(q5, plans, cfg_)};
    }
    case QType::kQ8: {
      ActionClass a = classify_action(ref, cfg_);
      std::vector<PredictionEntry> preds;
      for (const auto* p : find_all<PredictionList>(ctx)) {
        preds.insert(preds.end(), p->entries.begin(), p->entries.end());
      }
      const double r_col = collision_radius(4.5, 1.9);
      auto collides = [&](const Waypoints6& plan) {
        for (const auto& e : preds) {
          for (std::size_t k = 0; k < 6; ++k) {
            if (distance(plan[k], e.waypoints[k]) < r_col) return true;
          }
        }
        return false;
      };
      Waypoints6 plan = ref;
      for (int step = 0; step < kMaxDegradeSteps && a.speed != SpeedClass::kStop && collides(plan); ++step) {
        a.speed = static_cast<SpeedClass>(static_cast<int>(a.speed) + 1);
        if (a.speed == SpeedClass::kStop) a.steer = SteerClass::kStraight;
        plan = rollout_action(a, cfg_);
      }
      return {req.qtype, a};
    }
    case QType::kQ9: {
      const auto actions = find_all<ActionClass>(ctx);
      const ActionClass a = actions.empty() ? classify_action(ref, cfg_) : *actions.front();
      return {req.qtype, Trajectory6{rollout_action(a, cfg_)}};
    }
  }
  throw UnknownNode("unsupported qtype");
}

NoisyAnswerer::NoisyAnswerer(std::shared_ptr<Answerer> inner, double sigma_pos, double flip_prob,
                             std::uint64_t seed)
    : inner_(std::move(inner)), sigma_(sigma_pos), flip_(flip_prob), seed_(seed) {
  if (sigma_pos < 0.0) throw InvalidConfig("sigma_pos must be >= 0");
  if (flip_prob < 0.0 || flip_prob > 1.0) throw InvalidConfig("flip_prob must be in [0, 1]");
}

Answer NoisyAnswerer::perturb(const Answer& a, const std::string& uid) const {
  Rng rng(mix_seed(seed_, fnv1a64(uid)));
  auto jitter = [&](Vec2& p) {
    if (sigma_ <= 0.0) return;
    p.x += sigma_ * rng.normal();
    p.y += sigma_ * rng.normal();
  };
  auto flip = [&]() { return flip_ > 0.0 && rng.bernoulli(flip_); };
  auto other_class = [&](int current, int n) {
    int v = static_cast<int>(rng.uniform_int(0, n - 2));
    return v >= current ? v + 1 : v;
  };
  Answer out = a;
  std::visit(
      [&](auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ObjectList>) {
          for (auto& p : v.objects) jitter(p);
        } else if constexpr (std::is_same_v<T, PredictionList>) {
          for (auto& e : v.entries) {
            jitter(e.start);
            for (auto& p : e.waypoints) jitter(p);
            if (flip()) e.motion = static_cast<MotionClass>(other_class(static_cast<int>(e.motion), 4));
          }
        } else if constexpr (std::is_same_v<T, CavNotability>) {
          for (auto& e : v.entries) {
            if (flip()) e.notable = !e.notable;
          }
        } else if constexpr (std::is_same_v<T, ActionClass>) {
          if (flip()) v.speed = static_cast<SpeedClass>(other_class(static_cast<int>(v.speed), 5));
          if (flip()) v.steer = static_cast<SteerClass>(other_class(static_cast<int>(v.steer), 5));
        } else {
          for (auto& p : v.waypoints) jitter(p);
        }
      },
      out.value);
  return out;
}

std::string NoisyAnswerer::answer(const AnswerRequest& req) {
  const std::string text = inner_->answer(req);
  Answer parsed;
  try {
    parsed = parse_answer(text, req.qtype);
  } catch (const ParseError&) {
    return text;
  }
  return render_answer(perturb(parsed, req.uid));
}

ExternalAnswerer::ExternalAnswerer(std::string endpoint, double timeout_s, int max_inflight)
    : timeout_s_(timeout_s), slots_(std::clamp(max_inflight, 1, 1024)) {
  if (timeout_s <= 0.0) throw InvalidConfig("timeout must be positive");
  if (max_inflight < 1) throw InvalidConfig("max_inflight must be >= 1");
  std::string rest = endpoint;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  if (!rest.empty() && rest.back() == '/') rest.pop_back();
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) {
    host_ = rest;
  } else {
    host_ = rest.substr(0, colon);
    try {
      port_ = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidConfig("bad endpoint port: " + endpoint);
    }
  }
  if (host_.empty()) throw InvalidConfig("bad endpoint: " + endpoint);
}

std::string ExternalAnswerer::attempt(const std::string& body) {
  ++attempts_;
  httplib::Client cli(host_, port_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const auto start = std::chrono::steady_clock::now();
  auto res = cli.Post("/answer", body, "application/json");
  if (!res) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && elapsed >= timeout_s_ * 0.95)) {
      throw ExternalError(ExternalError::Kind::kTimeout, "timeout after " + std::to_string(elapsed) + " s");
    }
    throw ExternalError(ExternalError::Kind::kTransport, "transport error: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ExternalError(ExternalError::Kind::kBadResponse, "HTTP status " + std::to_string(res->status));
  }
  if (res->body.size() > kMaxBodyBytes) {
    throw ExternalError(ExternalError::Kind::kBadResponse, "response body exceeds 64 KiB");
  }
  nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("answer_text") || !j["answer_text"].is_string()) {
    throw ExternalError(ExternalError::Kind::kBadResponse, "response lacks a string answer_text");
  }
  return j["answer_text"].get<std::string>();
}

std::string ExternalAnswerer::answer(const AnswerRequest& req) {
  const std::string body =
      nlohmann::json{{"uid", req.uid}, {"qtype", qtype_index(req.qtype)}, {"question", req.question}, {"context", req.context}}
          .dump();
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  try {
    return attempt(body);
  } catch (const ExternalError& e) {
    if (e.kind() == ExternalError::Kind::kBadResponse) throw;
    return attempt(body);
  }
}

StubMode parse_stub_mode(const std::string& s) {
  if (s == "oracle") return StubMode::kOracle;
  if (s == "echo") return StubMode::kEcho;
  if (s == "malformed") return StubMode::kMalformed;
  if (s == "garbage") return StubMode::kGarbage;
  throw InvalidConfig("unknown stub mode '" + s + "' (oracle, echo, malformed, garbage)");
}

StubServer::StubServer(StubMode mode, std::vector<QaPair> pairs)
    : mode_(mode), server_(std::make_unique<httplib::Server>()) {
  for (auto& qa : pairs) answers_[qa.uid] = render_answer(qa.gt);
  install_routes();
}

StubServer::~StubServer() { stop(); }

void StubServer::install_routes() {
  server_->set_payload_max_length(kMaxBodyBytes);
  server_->Post("/answer", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    const auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("uid")) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
      return;
    }
    std::string text;
    switch (mode_) {
      case StubMode::kOracle: {
        const auto it = answers_.find(j.value("uid", std::string()));
        if (it == answers_.end()) {
          res.status = 404;
          res.set_content(R"({"error":"unknown uid"})", "application/json");
          return;
        }
        text = it->second;
        break;
      }
      case StubMode::kEcho:
        text = j.value("context", std::string());
        break;
      case StubMode::kMalformed:
        text = "I am not sure what the answer is";
        break;
      case StubMode::kGarbage:
        res.set_content("<html>not json</html>", "text/html");
        return;
    }
    res.set_content(nlohmann::json{{"answer_text", text}}.dump(), "application/json");
  });
}

int StubServer::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  if (port_ <= 0) throw IoError("cannot bind " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void StubServer::listen_blocking(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  port_ = port;
  server_->listen_after_bind();
}

void StubServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace coopgot
