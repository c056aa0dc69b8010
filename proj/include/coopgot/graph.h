#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coopgot/answer.h"
#include "json.hpp"

namespace coopgot {

// DAG of QA nodes; a parent's answer becomes part of each child's context.
struct GraphConfig {
  std::string name;
  std::vector<QType> nodes;
  std::vector<std::pair<QType, QType>> edges;  // (parent, child)

  bool has_node(QType q) const;
  // Parents of `q`, ascending.
  std::vector<QType> parents(QType q) const;
};

GraphConfig full_graph();
GraphConfig simplified_perception_graph();
GraphConfig simplified_prediction_graph();

// Built-in by name ("full", "simplified_perception", "simplified_prediction")
// or a JSON graph file path. Throws UnknownNode / IoError.
GraphConfig load_graph(const std::string& name_or_path);

nlohmann::json to_json(const GraphConfig& g);
GraphConfig graph_from_json(const nlohmann::json& j);

// Joins parent renderings (ascending parent qtype) into a child context,
// one per line; empty renderings (failed parents) are skipped.
std::string compose_context(const std::vector<std::string>& parent_texts);

// Topological order, ties broken by ascending qtype.
// Throws CyclicGraph or UnknownNode.
std::vector<QType> validate_graph(const GraphConfig& g);

}  // namespace coopgot
