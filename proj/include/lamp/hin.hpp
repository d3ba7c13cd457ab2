#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lamp/matrix.hpp"

namespace lamp {

struct Relation {
  std::string name;
  int src_type = 0;
  int dst_type = 0;
  // Same-type relations are materialized in both directions; cross-type
  // relations may be traversed against their declared orientation by a
  // bare step name.
  bool symmetric = false;
};

struct Edge {
  int src = 0;
  int dst = 0;
  int relation = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Heterogeneous information network. Node ids are dense 0..N-1, grouped by
// type in `node_types` order and in document order within a type, so the
// nodes of one type form a contiguous id range.
struct Hin {
  std::vector<std::string> node_types;
  std::vector<Relation> relations;

  std::vector<int> node_type;         // per node
  std::vector<std::string> node_key;  // original string id (sidecar map)
  std::vector<std::vector<double>> features;  // per node; empty = none supplied

  // Single-label: class id per node, -1 when unlabeled.
  std::vector<int> labels;
  // Multi-label: class ids per node (used when multi_label is set).
  std::vector<std::vector<int>> label_sets;
  bool multi_label = false;

  std::vector<Edge> edges;
  int target_type = 0;

  std::size_t num_nodes() const { return node_type.size(); }
  std::size_t num_types() const { return node_types.size(); }
  std::size_t num_relations() const { return relations.size(); }

  // First id and count of the contiguous block for `type`.
  std::size_t type_offset(int type) const;
  std::size_t type_count(int type) const;
  // Position of a node inside its type block.
  std::size_t local_index(int node) const { return static_cast<std::size_t>(node) - type_offset(node_type[node]); }

  int type_id(std::string_view name) const;        // -1 when absent
  int relation_id(std::string_view name) const;    // -1 when absent
  std::optional<int> node_id(std::string_view key) const;

  int num_classes() const;
  // Labels of the target-type nodes, in local order.
  std::vector<int> target_labels() const;

  void rebuild_index();

 private:
  std::vector<std::size_t> offsets_;
  std::unordered_map<std::string, int> key_index_;
};

struct ValidationIssue {
  std::string code;
  std::string message;
  std::vector<int> ids;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;
  bool ok() const { return errors.empty(); }
};

ValidationReport validate(const Hin& hin);

// Parses the JSON HIN document. Throws ParseError on malformed documents and
// DataError on dangling references, duplicate ids/edges and relation
// signature violations.
Hin parse_hin(std::string_view json_text);
Hin load_hin(const std::filesystem::path& path);
std::string dump_hin(const Hin& hin);
void save_hin(const Hin& hin, const std::filesystem::path& path);

// k-th node of `type` gets the k-th standard basis vector of dimension
// type_count(type).
std::vector<std::vector<double>> one_hot_id_features(const Hin& hin, int type);

// Standard basis vector of length |relations|.
std::vector<double> relation_one_hot(const Hin& hin, int relation);

// Feature matrix for the nodes of `type` (supplied features, or one-hot ids
// when no node of the type carries features).
Matrix type_feature_matrix(const Hin& hin, int type);

}  // namespace lamp
