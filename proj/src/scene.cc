#include "coopgot/scene.h"

#include <algorithm>
#include <fstream>

#include "coopgot/errors.h"

namespace coopgot {
namespace {

constexpr double kTimeEps = 1e-9;

nlohmann::json object_to_json(const TrackedObject& obj) {
  nlohmann::json poses = nlohmann::json::array();
  for (const Pose2& p : obj.trajectory.poses) poses.push_back({p.x, p.y, p.yaw});
  return {{"id", obj.id}, {"dims", {obj.length, obj.width}}, {"poses", std::move(poses)}};
}

TrackedObject object_from_json(const nlohmann::json& j, ObjectKind kind, double dt) {
  TrackedObject obj;
  obj.kind = kind;
  obj.id = j.at("id").get<std::string>();
  const auto& dims = j.at("dims");
  obj.length = dims.at(0).get<double>();
  obj.width = dims.at(1).get<double>();
  obj.trajectory.t0 = 0.0;
  obj.trajectory.dt_sample = dt;
  for (const auto& row : j.at("poses")) {
    obj.trajectory.poses.push_back(
        {row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>()});
  }
  return obj;
}

}  // namespace

Pose2 interpolate_pose(const Trajectory& traj, double t) {
  if (traj.poses.size() < 2) throw OutOfRange("trajectory has fewer than 2 poses");
  if (t < traj.t0 - kTimeEps || t > traj.t_end() + kTimeEps) {
    throw OutOfRange("time " + std::to_string(t) + " outside trajectory span [" +
                     std::to_string(traj.t0) + ", " + std::to_string(traj.t_end()) + "]");
  }
  const double u = (t - traj.t0) / traj.dt_sample;
  const double nearest = std::round(u);
  if (std::abs(u - nearest) < 1e-7) {
    const auto idx = std::clamp<std::size_t>(static_cast<std::size_t>(nearest), 0,
                                             traj.poses.size() - 1);
    return traj.poses[idx];
  }
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::floor(u)),
                                       traj.poses.size() - 2);
  const double alpha = u - static_cast<double>(i);
  const Pose2& a = traj.poses[i];
  const Pose2& b = traj.poses[i + 1];
  return {a.x + alpha * (b.x - a.x), a.y + alpha * (b.y - a.y),
          wrap_angle(a.yaw + alpha * wrap_angle(b.yaw - a.yaw))};
}

std::vector<Pose2> future_waypoints(const Trajectory& traj, double t_now, int n, double dt) {
  if (t_now + n * dt > traj.t_end() + kTimeEps) {
    throw OutOfRange("waypoint horizon exceeds trajectory span");
  }
  std::vector<Pose2> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) out.push_back(interpolate_pose(traj, t_now + k * dt));
  return out;
}

std::vector<const TrackedObject*> Scene::agents() const {
  std::vector<const TrackedObject*> out;
  out.reserve(cavs.size() + objects.size());
  for (const auto& c : cavs) out.push_back(&c);
  for (const auto& o : objects) out.push_back(&o);
  return out;
}

const TrackedObject& Scene::agent(const std::string& id) const {
  for (const auto& c : cavs) {
    if (c.id == id) return c;
  }
  for (const auto& o : objects) {
    if (o.id == id) return o;
  }
  throw UnknownId("unknown agent id '" + id + "' in scene " + seq_id);
}

bool Scene::has_agent(const std::string& id) const {
  const auto match = [&](const TrackedObject& o) { return o.id == id; };
  return std::any_of(cavs.begin(), cavs.end(), match) ||
         std::any_of(objects.begin(), objects.end(), match);
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json cavs = nlohmann::json::array();
  for (const auto& c : scene.cavs) cavs.push_back(object_to_json(c));
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects) objects.push_back(object_to_json(o));
  return {{"seq_id", scene.seq_id}, {"rate_hz", scene.rate_hz},
          {"duration", scene.duration}, {"seed", scene.seed},
          {"cavs", std::move(cavs)},    {"objects", std::move(objects)}};
}

Scene scene_from_json(const nlohmann::json& doc) {
  try {
    Scene scene;
    scene.seq_id = doc.at("seq_id").get<std::string>();
    scene.rate_hz = doc.at("rate_hz").get<double>();
    scene.duration = doc.at("duration").get<double>();
    scene.seed = doc.at("seed").get<std::uint64_t>();
    const double dt = 1.0 / scene.rate_hz;
    for (const auto& c : doc.at("cavs")) scene.cavs.push_back(object_from_json(c, ObjectKind::kCav, dt));
    for (const auto& o : doc.at("objects")) {
      scene.objects.push_back(object_from_json(o, ObjectKind::kVehicle, dt));
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed scene document: ") + e.what());
  }
}

void write_scene_file(const Scene& scene, const std::filesystem::path& path,
                      const nlohmann::json& header) {
  nlohmann::json doc = scene_to_json(scene);
  doc["header"] = header;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Scene read_scene_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return scene_from_json(doc);
}

std::vector<Scene> read_scene_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Scene> scenes;
  scenes.reserve(files.size());
  for (const auto& f : files) scenes.push_back(read_scene_file(f));
  return scenes;
}

}  // namespace coopgot
