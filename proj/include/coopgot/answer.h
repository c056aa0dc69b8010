#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coopgot/geometry.h"
#include "json.hpp"

namespace coopgot {

enum class QType { kQ1 = 1, kQ2, kQ3, kQ4, kQ5, kQ6, kQ7, kQ8, kQ9 };

inline constexpr std::array<QType, 9> kAllQTypes = {QType::kQ1, QType::kQ2, QType::kQ3,
                                                    QType::kQ4, QType::kQ5, QType::kQ6,
                                                    QType::kQ7, QType::kQ8, QType::kQ9};

inline int qtype_index(QType q) { return static_cast<int>(q); }
// "Q1".."Q9".
std::string qtype_name(QType q);
// Accepts "Q1".."Q9" or "1".."9"; throws UnknownNode.
QType parse_qtype(std::string_view s);
QType qtype_from_int(int q);

enum class MotionClass { kForward, kLeft, kRight, kStationary };
enum class SpeedClass { kFast = 0, kModerate, kSlow, kVerySlow, kStop };
enum class SteerClass { kLeft = 0, kSlightlyLeft, kStraight, kSlightlyRight, kRight };

std::string_view to_string(MotionClass m);
std::string_view to_string(SpeedClass s);
std::string_view to_string(SteerClass s);
std::optional<MotionClass> motion_from_string(std::string_view s);
std::optional<SpeedClass> speed_from_string(std::string_view s);
std::optional<SteerClass> steer_from_string(std::string_view s);

using Waypoints6 = std::array<Vec2, 6>;

struct ObjectList {
  std::vector<Vec2> objects;
  friend bool operator==(const ObjectList&, const ObjectList&) = default;
};

struct PredictionEntry {
  Vec2 start;
  Waypoints6 waypoints;
  MotionClass motion = MotionClass::kForward;
  friend bool operator==(const PredictionEntry&, const PredictionEntry&) = default;
};

struct PredictionList {
  std::vector<PredictionEntry> entries;
  friend bool operator==(const PredictionList&, const PredictionList&) = default;
};

struct CavFlag {
  std::string cav_id;
  bool notable = false;
  friend bool operator==(const CavFlag&, const CavFlag&) = default;
};

struct CavNotability {
  std::vector<CavFlag> entries;
  friend bool operator==(const CavNotability&, const CavNotability&) = default;
};

struct ActionClass {
  SpeedClass speed = SpeedClass::kStop;
  SteerClass steer = SteerClass::kStraight;
  friend bool operator==(const ActionClass&, const ActionClass&) = default;
};

struct Trajectory6 {
  Waypoints6 waypoints;
  friend bool operator==(const Trajectory6&, const Trajectory6&) = default;
};

using AnswerValue = std::variant<ObjectList, PredictionList, CavNotability, ActionClass, Trajectory6>;

// Structured answer for one QA node. The variant must match the qtype:
// Q1-Q4 ObjectList, Q5/Q7 PredictionList, Q6 CavNotability, Q8 ActionClass,
// Q9 Trajectory6.
struct Answer {
  QType qtype = QType::kQ1;
  AnswerValue value;

  friend bool operator==(const Answer&, const Answer&) = default;

  template <typename T>
  const T& as() const {
    return std::get<T>(value);
  }
};

bool variant_matches(QType q, const AnswerValue& v);

// Canonical one-decimal rendering of a coordinate; never prints "-0.0".
std::string format_coord(double v);
std::string format_position(Vec2 p);
// Rounds every coordinate exactly as render_answer prints it.
Answer quantize(const Answer& a);
double quantize_coord(double v);

std::string render_answer(const Answer& a);

// Strict inverse of render_answer. Leading/trailing whitespace and any text
// after the terminating period are ignored. Throws ParseError.
Answer parse_answer(std::string_view text, QType q);

nlohmann::json to_json(const Answer& a);
// Throws IoError on malformed documents.
Answer answer_from_json(const nlohmann::json& j, QType q);

}  // namespace coopgot
