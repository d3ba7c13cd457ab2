#include "lamp/hin.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "lamp/error.hpp"

namespace lamp {

using nlohmann::json;

std::size_t Hin::type_offset(int type) const {
  if (type < 0 || static_cast<std::size_t>(type) >= node_types.size()) throw DataError("unknown node type id");
  if (offsets_.size() != node_types.size() + 1) throw DataError("Hin index not built");
  return offsets_[type];
}

std::size_t Hin::type_count(int type) const {
  const std::size_t off = type_offset(type);
  return offsets_[type + 1] - off;
}

int Hin::type_id(std::string_view name) const {
  for (std::size_t i = 0; i < node_types.size(); ++i)
    if (node_types[i] == name) return static_cast<int>(i);
  return -1;
}

int Hin::relation_id(std::string_view name) const {
  for (std::size_t i = 0; i < relations.size(); ++i)
    if (relations[i].name == name) return static_cast<int>(i);
  return -1;
}

std::optional<int> Hin::node_id(std::string_view key) const {
  auto it = key_index_.find(std::string(key));
  if (it == key_index_.end()) return std::nullopt;
  return it->second;
}

int Hin::num_classes() const {
  int m = -1;
  if (multi_label) {
    for (const auto& s : label_sets)
      for (int c : s) m = std::max(m, c);
  } else {
    for (int c : labels) m = std::max(m, c);
  }
  return m + 1;
}

std::vector<int> Hin::target_labels() const {
  const std::size_t off = type_offset(target_type);
  const std::size_t n = type_count(target_type);
  std::vector<int> out(n, -1);
  for (std::size_t i = 0; i < n; ++i) out[i] = labels.empty() ? -1 : labels[off + i];
  return out;
}

void Hin::rebuild_index() {
  offsets_.assign(node_types.size() + 1, 0);
  for (int t : node_type) {
    if (t < 0 || static_cast<std::size_t>(t) >= node_types.size()) throw DataError("node with unknown type id");
    ++offsets_[t + 1];
  }
  for (std::size_t t = 0; t < node_types.size(); ++t) offsets_[t + 1] += offsets_[t];
  key_index_.clear();
  for (std::size_t i = 0; i < node_key.size(); ++i) key_index_.emplace(node_key[i], static_cast<int>(i));
  if (features.size() < node_type.size()) features.resize(node_type.size());
  if (labels.size() < node_type.size()) labels.resize(node_type.size(), -1);
  if (multi_label && label_sets.size() < node_type.size()) label_sets.resize(node_type.size());
}

ValidationReport validate(const Hin& hin) {
  ValidationReport rep;
  const std::size_t n = hin.num_nodes();

  if (hin.num_types() + hin.num_relations() <= 2) {
    rep.warnings.push_back({"degenerate_schema", "|node types| + |relations| <= 2; the network is not heterogeneous", {}});
  }
  if (hin.target_type < 0 || static_cast<std::size_t>(hin.target_type) >= hin.num_types()) {
    rep.errors.push_back({"bad_target_type", "target type id out of range", {hin.target_type}});
  }

  // Dense ids grouped by type.
  for (std::size_t i = 1; i < n; ++i) {
    if (hin.node_type[i] < hin.node_type[i - 1]) {
      rep.errors.push_back({"non_contiguous_types", "node ids are not grouped by type", {static_cast<int>(i)}});
      break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int t = hin.node_type[i];
    if (t < 0 || static_cast<std::size_t>(t) >= hin.num_types())
      rep.errors.push_back({"unknown_type", "node has an unknown type id", {static_cast<int>(i)}});
  }

  for (std::size_t r = 0; r < hin.num_relations(); ++r) {
    const auto& rel = hin.relations[r];
    if (rel.src_type < 0 || static_cast<std::size_t>(rel.src_type) >= hin.num_types() || rel.dst_type < 0 ||
        static_cast<std::size_t>(rel.dst_type) >= hin.num_types())
      rep.errors.push_back({"bad_relation", "relation '" + rel.name + "' references an unknown node type", {static_cast<int>(r)}});
  }

  std::set<std::tuple<int, int, int>> seen;
  for (std::size_t e = 0; e < hin.edges.size(); ++e) {
    const Edge& ed = hin.edges[e];
    if (ed.src < 0 || ed.dst < 0 || static_cast<std::size_t>(ed.src) >= n || static_cast<std::size_t>(ed.dst) >= n) {
      rep.errors.push_back({"dangling_edge", "edge endpoint out of range", {ed.src, ed.dst}});
      continue;
    }
    if (ed.relation < 0 || static_cast<std::size_t>(ed.relation) >= hin.num_relations()) {
      rep.errors.push_back({"unknown_relation", "edge has an unknown relation id", {ed.src, ed.dst}});
      continue;
    }
    const auto& rel = hin.relations[ed.relation];
    if (hin.node_type[ed.src] != rel.src_type || hin.node_type[ed.dst] != rel.dst_type) {
      rep.errors.push_back({"type_mismatch", "edge violates the signature of relation '" + rel.name + "'", {ed.src, ed.dst}});
    }
    if (!seen.emplace(ed.src, ed.dst, ed.relation).second)
      rep.errors.push_back({"duplicate_edge", "duplicate (src, dst, relation) triple", {ed.src, ed.dst}});
  }

  // Feature dimensions must agree within a type.
  std::map<int, std::size_t> dims;
  for (std::size_t i = 0; i < hin.features.size() && i < n; ++i) {
    if (hin.features[i].empty()) continue;
    auto [it, inserted] = dims.emplace(hin.node_type[i], hin.features[i].size());
    if (!inserted && it->second != hin.features[i].size())
      rep.errors.push_back({"feature_dim", "feature dimension differs within a node type", {static_cast<int>(i)}});
  }
  for (std::size_t i = 0; i < hin.features.size() && i < n; ++i) {
    if (hin.features[i].empty() && dims.count(hin.node_type[i]))
      rep.errors.push_back({"missing_feature", "node lacks a feature vector while others of its type have one", {static_cast<int>(i)}});
  }

  bool any_label = false;
  for (std::size_t i = 0; i < hin.labels.size() && i < n; ++i) {
    if (hin.labels[i] >= 0) any_label = true;
  }
  for (std::size_t i = 0; i < hin.label_sets.size() && i < n; ++i) {
    if (!hin.label_sets[i].empty()) any_label = true;
  }
  if (!any_label) rep.warnings.push_back({"no_labels", "no node carries a label", {}});
  return rep;
}

namespace {

[[noreturn]] void throw_report(const ValidationReport& rep) {
  const auto& e = rep.errors.front();
  std::ostringstream os;
  os << e.code << ": " << e.message;
  throw DataError(os.str());
}

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ParseError(std::string("HIN document lacks key '") + key + "'");
  return *it;
}

}  // namespace

Hin parse_hin(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed HIN document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("HIN document must be a JSON object");

  Hin hin;
  try {
    for (const auto& t : require(doc, "node_types")) hin.node_types.push_back(t.get<std::string>());
    std::set<std::string> type_names(hin.node_types.begin(), hin.node_types.end());
    if (type_names.size() != hin.node_types.size()) throw DataError("duplicate node type name");

    for (const auto& r : require(doc, "relations")) {
      Relation rel;
      rel.name = r.at("name").get<std::string>();
      rel.src_type = hin.type_id(r.at("src").get<std::string>());
      rel.dst_type = hin.type_id(r.at("dst").get<std::string>());
      rel.symmetric = r.value("symmetric", false);
      if (rel.src_type < 0 || rel.dst_type < 0) throw DataError("relation '" + rel.name + "' references an unknown node type");
      if (hin.relation_id(rel.name) >= 0) throw DataError("duplicate relation name '" + rel.name + "'");
      hin.relations.push_back(rel);
    }

    const std::string target = require(doc, "target_type").get<std::string>();
    hin.target_type = hin.type_id(target);
    if (hin.target_type < 0) throw DataError("target_type '" + target + "' is not a declared node type");

    // Bucket nodes per type, preserving document order within each type.
    struct RawNode {
      std::string key;
      std::vector<double> feature;
      int label = -1;
      std::vector<int> label_set;
      bool has_set = false;
    };
    std::vector<std::vector<RawNode>> buckets(hin.node_types.size());
    bool any_set = false;
    std::set<std::string> keys;
    for (const auto& nd : require(doc, "nodes")) {
      RawNode raw;
      raw.key = nd.at("id").get<std::string>();
      if (!keys.insert(raw.key).second) throw DataError("duplicate node id '" + raw.key + "'");
      const std::string tname = nd.at("type").get<std::string>();
      const int t = hin.type_id(tname);
      if (t < 0) throw DataError("node '" + raw.key + "' has undeclared type '" + tname + "'");
      if (auto f = nd.find("feature"); f != nd.end() && !f->is_null()) raw.feature = f->get<std::vector<double>>();
      if (auto l = nd.find("label"); l != nd.end() && !l->is_null()) {
        if (l->is_array()) {
          raw.label_set = l->get<std::vector<int>>();
          raw.has_set = true;
          any_set = true;
        } else {
          raw.label = l->get<int>();
          if (raw.label < 0) throw DataError("negative label on node '" + raw.key + "'");
        }
      }
      buckets[t].push_back(std::move(raw));
    }

    hin.multi_label = any_set;
    for (std::size_t t = 0; t < buckets.size(); ++t) {
      for (auto& raw : buckets[t]) {
        hin.node_type.push_back(static_cast<int>(t));
        hin.node_key.push_back(std::move(raw.key));
        hin.features.push_back(std::move(raw.feature));
        hin.labels.push_back(raw.label);
        if (any_set) {
          std::vector<int> s = raw.has_set ? raw.label_set : std::vector<int>{};
          if (!raw.has_set && raw.label >= 0) s.push_back(raw.label);
          hin.label_sets.push_back(std::move(s));
        }
      }
    }
    hin.rebuild_index();

    for (const auto& e : require(doc, "edges")) {
      if (!e.is_array() || e.size() != 3) throw ParseError("edge entries must be [src_id, dst_id, relation_name]");
      const std::string s = e[0].get<std::string>();
      const std::string d = e[1].get<std::string>();
      const std::string r = e[2].get<std::string>();
      auto si = hin.node_id(s);
      auto di = hin.node_id(d);
      if (!si) throw DataError("dangling reference: edge names unknown node '" + s + "'");
      if (!di) throw DataError("dangling reference: edge names unknown node '" + d + "'");
      const int rid = hin.relation_id(r);
      if (rid < 0) throw DataError("edge names unknown relation '" + r + "'");
      hin.edges.push_back({*si, *di, rid});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed HIN document: ") + e.what());
  }

  ValidationReport rep = validate(hin);
  if (!rep.ok()) throw_report(rep);
  return hin;
}

Hin load_hin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open HIN document " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_hin(ss.str());
}

std::string dump_hin(const Hin& hin) {
  json doc;
  doc["node_types"] = hin.node_types;
  json rels = json::array();
  for (const auto& r : hin.relations)
    rels.push_back({{"name", r.name},
                    {"src", hin.node_types[r.src_type]},
                    {"dst", hin.node_types[r.dst_type]},
                    {"symmetric", r.symmetric}});
  doc["relations"] = rels;
  json nodes = json::array();
  for (std::size_t i = 0; i < hin.num_nodes(); ++i) {
    json nd = {{"id", hin.node_key[i]}, {"type", hin.node_types[hin.node_type[i]]}};
    if (i < hin.features.size() && !hin.features[i].empty()) nd["feature"] = hin.features[i];
    if (hin.multi_label) {
      if (i < hin.label_sets.size() && !hin.label_sets[i].empty()) nd["label"] = hin.label_sets[i];
    } else if (i < hin.labels.size() && hin.labels[i] >= 0) {
      nd["label"] = hin.labels[i];
    }
    nodes.push_back(std::move(nd));
  }
  doc["nodes"] = nodes;
  json edges = json::array();
  for (const auto& e : hin.edges)
    edges.push_back({hin.node_key[e.src], hin.node_key[e.dst], hin.relations[e.relation].name});
  doc["edges"] = edges;
  doc["target_type"] = hin.node_types[hin.target_type];
  return doc.dump(1);
}

void save_hin(const Hin& hin, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << dump_hin(hin) << '\n';
}

std::vector<std::vector<double>> one_hot_id_features(const Hin& hin, int type) {
  if (type < 0 || static_cast<std::size_t>(type) >= hin.num_types()) throw DataError("one_hot_id_features: unknown type");
  const std::size_t n = hin.type_count(type);
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n; ++k) out[k][k] = 1.0;
  return out;
}

std::vector<double> relation_one_hot(const Hin& hin, int relation) {
  if (relation < 0 || static_cast<std::size_t>(relation) >= hin.num_relations())
    throw DataError("relation_one_hot: unknown relation");
  std::vector<double> v(hin.num_relations(), 0.0);
  v[relation] = 1.0;
  return v;
}

Matrix type_feature_matrix(const Hin& hin, int type) {
  const std::size_t off = hin.type_offset(type);
  const std::size_t n = hin.type_count(type);
  bool supplied = false;
  for (std::size_t i = 0; i < n; ++i)
    if (!hin.features[off + i].empty()) supplied = true;
  if (!supplied) {
    Matrix m(n, n);
    for (std::size_t k = 0; k < n; ++k) m(k, k) = 1.0;
    return m;
  }
  const std::size_t dim = hin.features[off].size();
  Matrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = hin.features[off + i];
    if (f.size() != dim) throw DataError("missing or inconsistent features for type '" + hin.node_types[type] + "'");
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = f[j];
  }
  return m;
}

}  // namespace lamp
