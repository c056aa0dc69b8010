#include "coopgot/answer.h"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "coopgot/errors.h"

namespace coopgot {
namespace {

constexpr std::array<std::string_view, 4> kMotionNames = {"forward", "left", "right", "stationary"};
constexpr std::array<std::string_view, 5> kSpeedNames = {"fast", "moderate", "slow", "very slow", "stop"};
constexpr std::array<std::string_view, 5> kSteerNames = {"left", "slightly left", "straight",
                                                         "slightly right", "right"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

std::string_view prefix_for(QType q) {
  switch (q) {
    case QType::kQ1:
    case QType::kQ3:
    case QType::kQ4:
      return "Notable objects:";
    case QType::kQ2:
      return "Occluding objects:";
    case QType::kQ5:
    case QType::kQ7:
      return "Predictions:";
    case QType::kQ6:
      return "Other CAVs:";
    case QType::kQ8:
      return "Suggested action:";
    case QType::kQ9:
      return "Suggested trajectory:";
  }
  return "";
}

std::string join_positions(const Waypoints6& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ", ";
    out += format_position(w[i]);
  }
  return out;
}

// Recursive-descent reader over one rendered answer.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  [[noreturn]] void fail(const std::string& expected) const {
    throw ParseError(pos_, expected, std::string(text_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool try_literal(std::string_view lit) {
    if (text_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view lit) {
    if (!try_literal(lit)) fail("'" + std::string(lit) + "'");
  }

  // Single separator character followed by optional spaces, e.g. ", ".
  void expect_sep(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("'") + c + "'");
    ++pos_;
    skip_ws();
  }

  bool try_sep(char c) {
    const std::size_t save = pos_;
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      skip_ws();
      return true;
    }
    pos_ = save;
    return false;
  }

  double number() {
    const std::size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '-') ++pos_;
    const std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits) {
      pos_ = start;
      fail("number");
    }
    if (pos_ + 1 < text_.size() && text_[pos_] == '.' &&
        std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    const std::string token(text_.substr(start, pos_ - start));
    return std::strtod(token.c_str(), nullptr);
  }

  Vec2 position() {
    expect("(");
    skip_ws();
    const double x = number();
    expect_sep(',');
    const double y = number();
    skip_ws();
    expect(")");
    return {x, y};
  }

  // Matches the longest keyword from `names` at the cursor.
  template <std::size_t N>
  std::size_t keyword(const std::array<std::string_view, N>& names, const std::string& what) {
    std::size_t best = N;
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& n = names[i];
      if (n.size() > best_len && text_.substr(pos_, n.size()) == n) {
        // Keyword must end at a word boundary.
        const std::size_t end = pos_ + n.size();
        if (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) {
          continue;
        }
        best = i;
        best_len = n.size();
      }
    }
    if (best == N) fail(what);
    pos_ += best_len;
    return best;
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("CAV id");
    return std::string(text_.substr(start, pos_ - start));
  }

  bool at_none() {
    if (text_.substr(pos_, 4) == "None") {
      const std::size_t end = pos_ + 4;
      if (end >= text_.size() || !std::isalnum(static_cast<unsigned char>(text_[end]))) {
        pos_ = end;
        return true;
      }
    }
    return false;
  }

  void finish() {
    skip_ws();
    expect(".");
    // Anything after the terminating period is free-form prose.
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

Waypoints6 six_positions(Reader& r) {
  Waypoints6 w;
  w[0] = r.position();
  for (std::size_t i = 1; i < 6; ++i) {
    r.expect_sep(',');
    w[i] = r.position();
  }
  return w;
}

AnswerValue parse_body(Reader& r, QType q) {
  switch (q) {
    case QType::kQ1:
    case QType::kQ2:
    case QType::kQ3:
    case QType::kQ4: {
      ObjectList list;
      if (r.at_none()) return list;
      list.objects.push_back(r.position());
      while (r.try_sep(';')) list.objects.push_back(r.position());
      return list;
    }
    case QType::kQ5:
    case QType::kQ7: {
      PredictionList list;
      if (r.at_none()) return list;
      do {
        PredictionEntry e;
        e.start = r.position();
        r.skip_ws();
        e.motion = static_cast<MotionClass>(r.keyword(kMotionNames, "motion class"));
        r.expect_sep(':');
        e.waypoints = six_positions(r);
        list.entries.push_back(e);
      } while (r.try_sep(';'));
      return list;
    }
    case QType::kQ6: {
      CavNotability cavs;
      if (r.at_none()) return cavs;
      do {
        CavFlag f;
        f.cav_id = r.identifier();
        r.skip_ws();
        static constexpr std::array<std::string_view, 2> kFlags = {"notable", "not notable"};
        f.notable = r.keyword(kFlags, "'notable' or 'not notable'") == 0;
        cavs.entries.push_back(f);
      } while (r.try_sep(';'));
      return cavs;
    }
    case QType::kQ8: {
      ActionClass a;
      a.speed = static_cast<SpeedClass>(r.keyword(kSpeedNames, "speed class"));
      r.expect_sep(',');
      a.steer = static_cast<SteerClass>(r.keyword(kSteerNames, "steering class"));
      return a;
    }
    case QType::kQ9:
      return Trajectory6{six_positions(r)};
  }
  r.fail("known question type");
}

nlohmann::json pos_json(Vec2 p) { return nlohmann::json::array({p.x, p.y}); }
Vec2 pos_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

nlohmann::json waypoints_json(const Waypoints6& w) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Vec2& p : w) arr.push_back(pos_json(p));
  return arr;
}

Waypoints6 waypoints_from(const nlohmann::json& j) {
  if (j.size() != 6) throw IoError("expected 6 waypoints");
  Waypoints6 w;
  for (std::size_t i = 0; i < 6; ++i) w[i] = pos_from(j.at(i));
  return w;
}

}  // namespace

std::string qtype_name(QType q) { return "Q" + std::to_string(qtype_index(q)); }

QType qtype_from_int(int q) {
  if (q < 1 || q > 9) throw UnknownNode("question type out of range: " + std::to_string(q));
  return static_cast<QType>(q);
}

QType parse_qtype(std::string_view s) {
  if (!s.empty() && (s.front() == 'Q' || s.front() == 'q')) s.remove_prefix(1);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UnknownNode("unknown question node '" + std::string(s) + "'");
  }
  return qtype_from_int(value);
}

std::string_view to_string(MotionClass m) { return kMotionNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(SpeedClass s) { return kSpeedNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(SteerClass s) { return kSteerNames[static_cast<std::size_t>(s)]; }
std::optional<MotionClass> motion_from_string(std::string_view s) { return lookup<MotionClass>(kMotionNames, s); }
std::optional<SpeedClass> speed_from_string(std::string_view s) { return lookup<SpeedClass>(kSpeedNames, s); }
std::optional<SteerClass> steer_from_string(std::string_view s) { return lookup<SteerClass>(kSteerNames, s); }

bool variant_matches(QType q, const AnswerValue& v) {
  switch (q) {
    case QType::kQ1:
    case QType::kQ2:
    case QType::kQ3:
    case QType::kQ4:
      return std::holds_alternative<ObjectList>(v);
    case QType::kQ5:
    case QType::kQ7:
      return std::holds_alternative<PredictionList>(v);
    case QType::kQ6:
      return std::holds_alternative<CavNotability>(v);
    case QType::kQ8:
      return std::holds_alternative<ActionClass>(v);
    case QType::kQ9:
      return std::holds_alternative<Trajectory6>(v);
  }
  return false;
}

std::string format_coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  std::string s(buf);
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string format_position(Vec2 p) { return "(" + format_coord(p.x) + ", " + format_coord(p.y) + ")"; }

double quantize_coord(double v) { return std::strtod(format_coord(v).c_str(), nullptr); }

Answer quantize(const Answer& a) {
  const auto q = [](Vec2 p) { return Vec2{quantize_coord(p.x), quantize_coord(p.y)}; };
  Answer out = a;
  std::visit(
      [&](auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ObjectList>) {
          for (auto& p : v.objects) p = q(p);
        } else if constexpr (std::is_same_v<T, PredictionList>) {
          for (auto& e : v.entries) {
            e.start = q(e.start);
            for (auto& p : e.waypoints) p = q(p);
          }
        } else if constexpr (std::is_same_v<T, Trajectory6>) {
          for (auto& p : v.waypoints) p = q(p);
        }
      },
      out.value);
  return out;
}

std::string render_answer(const Answer& a) {
  std::string out(prefix_for(a.qtype));
  out += ' ';
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ObjectList>) {
          if (v.objects.empty()) out += "None";
          for (std::size_t i = 0; i < v.objects.size(); ++i) {
            if (i) out += "; ";
            out += format_position(v.objects[i]);
          }
        } else if constexpr (std::is_same_v<T, PredictionList>) {
          if (v.entries.empty()) out += "None";
          for (std::size_t i = 0; i < v.entries.size(); ++i) {
            if (i) out += "; ";
            const auto& e = v.entries[i];
            out += format_position(e.start);
            out += ' ';
            out += to_string(e.motion);
            out += ": ";
            out += join_positions(e.waypoints);
          }
        } else if constexpr (std::is_same_v<T, CavNotability>) {
          if (v.entries.empty()) out += "None";
          for (std::size_t i = 0; i < v.entries.size(); ++i) {
            if (i) out += "; ";
            out += v.entries[i].cav_id;
            out += v.entries[i].notable ? " notable" : " not notable";
          }
        } else if constexpr (std::is_same_v<T, ActionClass>) {
          out += to_string(v.speed);
          out += ", ";
          out += to_string(v.steer);
        } else {
          out += join_positions(v.waypoints);
        }
      },
      a.value);
  out += '.';
  return out;
}

Answer parse_answer(std::string_view text, QType q) {
  Reader r(text);
  r.skip_ws();
  r.expect(prefix_for(q));
  r.skip_ws();
  Answer a{q, parse_body(r, q)};
  r.finish();
  return a;
}

nlohmann::json to_json(const Answer& a) {
  nlohmann::json j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ObjectList>) {
          j["kind"] = "object_list";
          j["objects"] = nlohmann::json::array();
          for (const Vec2& p : v.objects) j["objects"].push_back(pos_json(p));
        } else if constexpr (std::is_same_v<T, PredictionList>) {
          j["kind"] = "prediction_list";
          j["entries"] = nlohmann::json::array();
          for (const auto& e : v.entries) {
            j["entries"].push_back({{"start", pos_json(e.start)},
                                    {"waypoints", waypoints_json(e.waypoints)},
                                    {"motion", std::string(to_string(e.motion))}});
          }
        } else if constexpr (std::is_same_v<T, CavNotability>) {
          j["kind"] = "cav_notability";
          j["entries"] = nlohmann::json::array();
          for (const auto& e : v.entries) j["entries"].push_back({{"cav_id", e.cav_id}, {"notable", e.notable}});
        } else if constexpr (std::is_same_v<T, ActionClass>) {
          j["kind"] = "action";
          j["speed"] = std::string(to_string(v.speed));
          j["steer"] = std::string(to_string(v.steer));
          j["speed_index"] = static_cast<int>(v.speed);
          j["steer_index"] = static_cast<int>(v.steer);
        } else {
          j["kind"] = "trajectory";
          j["waypoints"] = waypoints_json(v.waypoints);
        }
      },
      a.value);
  return j;
}

Answer answer_from_json(const nlohmann::json& j, QType q) {
  try {
    Answer a{q, ObjectList{}};
    switch (q) {
      case QType::kQ1:
      case QType::kQ2:
      case QType::kQ3:
      case QType::kQ4: {
        ObjectList list;
        for (const auto& p : j.at("objects")) list.objects.push_back(pos_from(p));
        a.value = list;
        break;
      }
      case QType::kQ5:
      case QType::kQ7: {
        PredictionList list;
        for (const auto& e : j.at("entries")) {
          const auto motion = motion_from_string(e.at("motion").get<std::string>());
          if (!motion) throw IoError("unknown motion class");
          list.entries.push_back({pos_from(e.at("start")), waypoints_from(e.at("waypoints")), *motion});
        }
        a.value = list;
        break;
      }
      case QType::kQ6: {
        CavNotability cavs;
        for (const auto& e : j.at("entries")) {
          cavs.entries.push_back({e.at("cav_id").get<std::string>(), e.at("notable").get<bool>()});
        }
        a.value = cavs;
        break;
      }
      case QType::kQ8: {
        const auto speed = speed_from_string(j.at("speed").get<std::string>());
        const auto steer = steer_from_string(j.at("steer").get<std::string>());
        if (!speed || !steer) throw IoError("unknown action class");
        a.value = ActionClass{*speed, *steer};
        break;
      }
      case QType::kQ9:
        a.value = Trajectory6{waypoints_from(j.at("waypoints"))};
        break;
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed answer document: ") + e.what());
  }
}

}  // namespace coopgot
