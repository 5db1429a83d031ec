#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdattack/graph.hpp"

namespace cdattack::io {

// Edge file: one "u v" pair per line, 0-based ids, '#' starts a comment.
// Feature file: CSV with header "id,f0,...,f{d-1}" and one row per node.
// Edit file: "DEL u v" / "INS u v" lines.

/// Parses an edge stream and optional feature stream. The feature rows fix
/// N; without features N = max id + 1 and the features are the identity.
Graph read_graph(std::istream& edges, std::istream* features, const std::string& edge_name = "<edges>",
                 const std::string& feature_name = "<features>");
Graph load_graph(const std::string& edge_path, const std::optional<std::string>& feature_path = std::nullopt);

void write_edges(std::ostream& out, const Graph& g);
void write_features(std::ostream& out, const Matrix& features);
void save_graph(const Graph& g, const std::string& edge_path, const std::string& feature_path);

void write_edits(std::ostream& out, const EditSet& edits);
EditSet read_edits(std::istream& in, const std::string& name = "<edits>");
void save_edits(const EditSet& edits, const std::string& path);
EditSet load_edits(const std::string& path);

/// "id,label" CSV with one row per node.
void write_labels(std::ostream& out, const std::vector<int>& labels);
void save_labels(const std::vector<int>& labels, const std::string& path);
std::vector<int> read_labels(std::istream& in, const std::string& name = "<labels>");
std::vector<int> load_labels(const std::string& path);

}  // namespace cdattack::io
