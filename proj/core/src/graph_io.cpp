#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vmg/binary_io.hpp"
#include "vmg/errors.hpp"
#include "vmg/graph.hpp"

namespace vmg::graph {
namespace {

using nlohmann::json;

constexpr int kGraphVersion = 1;

json vec_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector json_vec(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

std::string encode_graph(const MemoryGraph& graph) {
  json vertices = json::array();
  for (const auto& v : graph.vertices()) {
    vertices.push_back({{"id", v.id}, {"state", vec_json(v.representative_state)}, {"feature", vec_json(v.feature)}});
  }
  json edges = json::array();
  for (std::size_t k = 0; k < graph.edge_count(); ++k) {
    edges.push_back({graph.edges()[k].from, graph.edges()[k].to, graph.edge_rewards()[k]});
  }
  json doc = {{"format", "vmg-graph"},
              {"version", kGraphVersion},
              {"gamma_m", graph.gamma_m()},
              {"reward_mode", std::string(to_string(graph.metadata().reward_mode))},
              {"model_hash", graph.metadata().model_hash},
              {"dataset_hash", graph.metadata().dataset_hash},
              {"vertices", std::move(vertices)},
              {"edges", std::move(edges)},
              {"assignment", graph.assignment().per_episode}};
  return doc.dump() + "\n";
}

MemoryGraph decode_graph(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed graph JSON: ") + e.what(), 1);
  }
  try {
    if (doc.at("format") != "vmg-graph") throw SchemaError("not a vmg-graph document");
    if (doc.at("version") != kGraphVersion) throw SchemaError("unsupported graph format version");
    std::vector<Vertex> vertices;
    for (const auto& v : doc.at("vertices")) {
      vertices.push_back(Vertex{v.at("id").get<std::size_t>(), json_vec(v.at("state")), json_vec(v.at("feature"))});
    }
    std::vector<Edge> edges;
    std::vector<double> rewards;
    for (const auto& e : doc.at("edges")) {
      edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
      rewards.push_back(e.at(2).get<double>());
    }
    StateAssignment asg{doc.at("assignment").get<std::vector<std::vector<std::size_t>>>()};
    GraphMetadata meta{doc.at("model_hash").get<std::string>(), doc.at("dataset_hash").get<std::string>(),
                       parse_reward_mode(doc.at("reward_mode").get<std::string>())};
    return MemoryGraph(std::move(vertices), std::move(edges), std::move(rewards), doc.at("gamma_m").get<double>(),
                       std::move(asg), std::move(meta));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("graph document: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("graph document: ") + e.what());
  }
}

void save_graph(const MemoryGraph& graph, const std::string& path) { io::write_text_file(path, encode_graph(graph)); }

MemoryGraph load_graph(const std::string& path) {
  const auto bytes = io::read_file(path);
  return decode_graph(std::string(bytes.begin(), bytes.end()));
}

std::string encode_layout(const MemoryGraph& graph, std::span<const double> values) {
  if (!values.empty() && values.size() != graph.vertex_count()) {
    throw InvalidArgument("encode_layout: one value per vertex required");
  }
  const auto coords = pca_layout(graph);
  json vertices = json::array();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    json v = {{"id", i}, {"x", coords[i][0]}, {"y", coords[i][1]}};
    if (!values.empty()) v["value"] = values[i];
    vertices.push_back(std::move(v));
  }
  json edges = json::array();
  for (std::size_t k = 0; k < graph.edge_count(); ++k) {
    edges.push_back({{"from", graph.edges()[k].from}, {"to", graph.edges()[k].to}, {"reward", graph.edge_rewards()[k]}});
  }
  json doc = {{"format", "vmg-layout"}, {"version", 1}, {"projection", "pca"}, {"vertices", vertices}, {"edges", edges}};
  return doc.dump(2) + "\n";
}

}  // namespace vmg::graph
