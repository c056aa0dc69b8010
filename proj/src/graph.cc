#include "coopgot/graph.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <set>

#include "coopgot/errors.h"

namespace coopgot {
namespace {

using E = std::pair<QType, QType>;

}  // namespace

bool GraphConfig::has_node(QType q) const { return std::find(nodes.begin(), nodes.end(), q) != nodes.end(); }

std::vector<QType> GraphConfig::parents(QType q) const {
  std::vector<QType> out;
  for (const auto& [p, c] : edges) {
    if (c == q) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

GraphConfig full_graph() {
  return {"full",
          {kAllQTypes.begin(), kAllQTypes.end()},
          {E{QType::kQ2, QType::kQ3}, E{QType::kQ1, QType::kQ4}, E{QType::kQ3, QType::kQ4},
           E{QType::kQ4, QType::kQ5}, E{QType::kQ4, QType::kQ6}, E{QType::kQ5, QType::kQ7},
           E{QType::kQ6, QType::kQ7}, E{QType::kQ7, QType::kQ8}, E{QType::kQ8, QType::kQ9}}};
}

GraphConfig simplified_perception_graph() {
  GraphConfig g = full_graph();
  g.name = "simplified_perception";
  std::erase_if(g.nodes, [](QType q) { return q == QType::kQ1 || q == QType::kQ2 || q == QType::kQ3; });
  std::erase_if(g.edges, [&](const E& e) { return !g.has_node(e.first) || !g.has_node(e.second); });
  return g;
}

GraphConfig simplified_prediction_graph() {
  return {"simplified_prediction",
          {QType::kQ1, QType::kQ2, QType::kQ3, QType::kQ4, QType::kQ5, QType::kQ8, QType::kQ9},
          {E{QType::kQ2, QType::kQ3}, E{QType::kQ1, QType::kQ4}, E{QType::kQ3, QType::kQ4},
           E{QType::kQ4, QType::kQ5}, E{QType::kQ5, QType::kQ8}, E{QType::kQ8, QType::kQ9}}};
}

nlohmann::json to_json(const GraphConfig& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (QType q : g.nodes) nodes.push_back(qtype_name(q));
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [p, c] : g.edges) edges.push_back({qtype_name(p), qtype_name(c)});
  return {{"name", g.name}, {"nodes", nodes}, {"edges", edges}};
}

GraphConfig graph_from_json(const nlohmann::json& j) {
  try {
    GraphConfig g;
    g.name = j.value("name", std::string("custom"));
    for (const auto& n : j.at("nodes")) g.nodes.push_back(parse_qtype(n.get<std::string>()));
    for (const auto& e : j.at("edges")) {
      g.edges.emplace_back(parse_qtype(e.at(0).get<std::string>()), parse_qtype(e.at(1).get<std::string>()));
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed graph document: ") + e.what());
  }
}

GraphConfig load_graph(const std::string& name_or_path) {
  if (name_or_path == "full") return full_graph();
  if (name_or_path == "simplified_perception") return simplified_perception_graph();
  if (name_or_path == "simplified_prediction") return simplified_prediction_graph();
  if (!std::filesystem::exists(name_or_path)) {
    throw UnknownNode("unknown graph '" + name_or_path + "' (not a built-in name or file)");
  }
  std::ifstream in(name_or_path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid graph JSON in " + name_or_path + ": " + e.what());
  }
  GraphConfig g = graph_from_json(doc);
  validate_graph(g);
  return g;
}

std::string compose_context(const std::vector<std::string>& parent_texts) {
  std::string out;
  for (const auto& t : parent_texts) {
    if (t.empty()) continue;
    if (!out.empty()) out += '\n';
    out += t;
  }
  return out;
}

std::vector<QType> validate_graph(const GraphConfig& g) {
  std::set<QType> nodes(g.nodes.begin(), g.nodes.end());
  std::set<E> edges;
  for (const auto& e : g.edges) {
    if (!nodes.count(e.first) || !nodes.count(e.second)) {
      throw UnknownNode("edge " + qtype_name(e.first) + "->" + qtype_name(e.second) +
                        " references a node outside graph '" + g.name + "'");
    }
    edges.insert(e);
  }
  std::map<QType, int> indegree;
  for (QType q : nodes) indegree[q] = 0;
  for (const auto& e : edges) ++indegree[e.second];

  std::priority_queue<QType, std::vector<QType>, std::greater<>> ready;
  for (const auto& [q, d] : indegree) {
    if (d == 0) ready.push(q);
  }
  std::vector<QType> order;
  while (!ready.empty()) {
    const QType q = ready.top();
    ready.pop();
    order.push_back(q);
    for (const auto& e : edges) {
      if (e.first == q && --indegree[e.second] == 0) ready.push(e.second);
    }
  }
  if (order.size() != nodes.size()) throw CyclicGraph("graph '" + g.name + "' contains a cycle");
  return order;
}

}  // namespace coopgot
