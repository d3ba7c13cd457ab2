#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lamp/hin.hpp"

namespace lamp {

enum class Direction { forward, reverse };

struct MetaPathStep {
  int relation = 0;
  Direction direction = Direction::forward;

  friend bool operator==(const MetaPathStep&, const MetaPathStep&) = default;
};

struct MetaPath {
  std::string name;
  std::vector<MetaPathStep> steps;
};

// Node type reached by `step` when entering from `from_type`; throws
// DataError when the step does not type-check.
int step_target_type(const Hin& hin, const MetaPathStep& step, int from_type);

// Throws DataError unless consecutive steps type-check and the path starts
// and ends at the target type.
void check_metapath(const Hin& hin, const MetaPath& mp);

// True when walking the path backwards gives the same relation sequence.
bool is_palindromic(const Hin& hin, const MetaPath& mp);

// Parses `NAME=STEP,STEP` where STEP is `relation` or `~relation`.
MetaPath parse_metapath(const Hin& hin, std::string_view spec);

// Resolves a type-letter shorthand such as "PAP" or "-PPSP": each letter
// names the node type with that initial, consecutive types are joined by the
// unique relation between them, a leading '-' reverses the first step.
MetaPath metapath_from_shorthand(const Hin& hin, std::string_view name);

// Either `NAME=STEPS;NAME=STEPS` or comma separated shorthands `PAP,PSP`.
std::vector<MetaPath> parse_metapath_list(const Hin& hin, std::string_view spec);

// Sparse integer matrix in CSR form.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<int> col;
  std::vector<std::uint64_t> val;

  std::size_t nnz() const { return col.size(); }
};

struct SpgemmResult {
  CsrMatrix matrix;
  bool saturated = false;
};

// C = A * B with 64-bit saturating counts. `boolean` collapses every
// nonzero to 1. Throws ResourceError when nnz(C) exceeds `nnz_budget`.
SpgemmResult spgemm(const CsrMatrix& a, const CsrMatrix& b, bool boolean, std::size_t nnz_budget);

// Adjacency of one meta-path step between the local index spaces of its
// source and destination types.
CsrMatrix step_adjacency(const Hin& hin, const MetaPathStep& step);

struct MaterializeOptions {
  bool counts = true;
  std::size_t nnz_budget = 200'000'000;
};

// Homogeneous graph over the target nodes (local ids). Edges are unordered
// pairs (u < v), sorted lexicographically.
struct MetaPathSubGraph {
  MetaPath metapath;
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::uint64_t> counts;  // aligned with edges; empty when not requested
  bool saturated = false;

  std::vector<std::vector<int>> neighbors() const;
  std::size_t degree_sum() const { return 2 * edges.size(); }
};

MetaPathSubGraph materialize(const Hin& hin, const MetaPath& mp, const MaterializeOptions& opts = {});

// Union of meta-path sub-graphs; encoding(e, i) is 1 iff edge e is in member i.
struct IntegratedSubGraph {
  std::vector<std::string> metapaths;
  std::size_t n = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::uint8_t> bits;  // edges.size() x metapaths.size()

  std::size_t num_metapaths() const { return metapaths.size(); }
  std::uint8_t encoding(std::size_t e, std::size_t i) const { return bits[e * metapaths.size() + i]; }
  std::vector<std::uint8_t> encoding(std::size_t e) const;
};

IntegratedSubGraph integrate(const std::vector<MetaPathSubGraph>& subgraphs);

// C_i(j) = number of sub-graphs in which j neighbours i. Zero entries and i
// itself are omitted.
std::map<int, int> connectivity_vector(const std::vector<MetaPathSubGraph>& subgraphs, int i);
std::vector<std::map<int, int>> connectivity_all(const std::vector<MetaPathSubGraph>& subgraphs);

// Fraction of edges joining equal labels.
double homophily_ratio(const MetaPathSubGraph& sg, const std::vector<int>& labels);

double jaccard_similarity(const MetaPathSubGraph& a, const MetaPathSubGraph& b);
// |E_a ∩ E_b| / |E_b|: fraction of b's edges covered by a.
double coverage_ratio(const MetaPathSubGraph& a, const MetaPathSubGraph& b);

// All index subsets of {0..count-1} with size >= min_size, ordered by size
// then lexicographically.
std::vector<std::vector<int>> enumerate_combinations(std::size_t count, std::size_t min_size);

}  // namespace lamp
