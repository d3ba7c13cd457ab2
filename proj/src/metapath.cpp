#include "lamp/metapath.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "lamp/error.hpp"

namespace lamp {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b, bool& saturated) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) {
    saturated = true;
    return ~std::uint64_t{0};
  }
  return r;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b, bool& saturated) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) {
    saturated = true;
    return ~std::uint64_t{0};
  }
  return r;
}

// Direction with same-type symmetric relations normalized to forward, for
// comparing step sequences.
Direction canonical(const Hin& hin, const MetaPathStep& s) {
  const auto& r = hin.relations[s.relation];
  if (r.symmetric && r.src_type == r.dst_type) return Direction::forward;
  return s.direction;
}

void require_same_universe(const MetaPathSubGraph& a, const MetaPathSubGraph& b) {
  if (a.n != b.n) throw DataError("meta-path sub-graphs have different node universes");
}

std::size_t intersection_size(const MetaPathSubGraph& a, const MetaPathSubGraph& b) {
  std::size_t i = 0, j = 0, c = 0;
  while (i < a.edges.size() && j < b.edges.size()) {
    if (a.edges[i] < b.edges[j]) {
      ++i;
    } else if (b.edges[j] < a.edges[i]) {
      ++j;
    } else {
      ++c;
      ++i;
      ++j;
    }
  }
  return c;
}

}  // namespace

int step_target_type(const Hin& hin, const MetaPathStep& step, int from_type) {
  if (step.relation < 0 || static_cast<std::size_t>(step.relation) >= hin.num_relations())
    throw DataError("meta-path step references an unknown relation");
  const auto& r = hin.relations[step.relation];
  const int in = step.direction == Direction::forward ? r.src_type : r.dst_type;
  const int out = step.direction == Direction::forward ? r.dst_type : r.src_type;
  if (in != from_type)
    throw DataError("meta-path step '" + r.name + "' does not type-check after type '" + hin.node_types[from_type] + "'");
  return out;
}

void check_metapath(const Hin& hin, const MetaPath& mp) {
  if (mp.steps.empty()) throw DataError("meta-path '" + mp.name + "' has no steps");
  int t = hin.target_type;
  for (const auto& s : mp.steps) t = step_target_type(hin, s, t);
  if (t != hin.target_type) throw DataError("meta-path '" + mp.name + "' does not end at the target type");
}

bool is_palindromic(const Hin& hin, const MetaPath& mp) {
  const std::size_t l = mp.steps.size();
  for (std::size_t k = 0; k < l; ++k) {
    const auto& a = mp.steps[k];
    const auto& b = mp.steps[l - 1 - k];
    if (a.relation != b.relation) return false;
    const Direction da = canonical(hin, a);
    Direction db = canonical(hin, b);
    const auto& r = hin.relations[b.relation];
    if (!(r.symmetric && r.src_type == r.dst_type))
      db = db == Direction::forward ? Direction::reverse : Direction::forward;
    if (da != db) return false;
  }
  return true;
}

MetaPath parse_metapath(const Hin& hin, std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos) throw ParseError("meta-path spec must look like NAME=STEP,STEP");
  MetaPath mp;
  mp.name = trim(spec.substr(0, eq));
  if (mp.name.empty()) throw ParseError("meta-path spec has an empty name");
  int current = hin.target_type;
  for (const auto& tok : split(spec.substr(eq + 1), ',')) {
    if (tok.empty()) throw ParseError("empty step in meta-path '" + mp.name + "'");
    MetaPathStep step;
    std::string rel_name = tok;
    bool explicit_reverse = false;
    if (rel_name.front() == '~') {
      explicit_reverse = true;
      rel_name = trim(std::string_view(rel_name).substr(1));
    }
    step.relation = hin.relation_id(rel_name);
    if (step.relation < 0) throw DataError("meta-path '" + mp.name + "' names unknown relation '" + rel_name + "'");
    const auto& r = hin.relations[step.relation];
    if (explicit_reverse) {
      step.direction = Direction::reverse;
    } else if (r.symmetric && r.src_type != r.dst_type && current == r.dst_type) {
      step.direction = Direction::reverse;
    }
    current = step_target_type(hin, step, current);
    mp.steps.push_back(step);
  }
  check_metapath(hin, mp);
  return mp;
}

MetaPath metapath_from_shorthand(const Hin& hin, std::string_view name) {
  MetaPath mp;
  mp.name = trim(name);
  std::string_view letters = mp.name;
  bool flip_first = false;
  if (!letters.empty() && letters.front() == '-') {
    flip_first = true;
    letters.remove_prefix(1);
  }
  if (letters.size() < 2) throw ParseError("meta-path shorthand '" + mp.name + "' needs at least two node types");

  std::vector<int> types;
  for (char c : letters) {
    int found = -1;
    for (std::size_t t = 0; t < hin.num_types(); ++t) {
      const auto& tn = hin.node_types[t];
      if (!tn.empty() && std::tolower(static_cast<unsigned char>(tn.front())) == std::tolower(static_cast<unsigned char>(c))) {
        if (found >= 0) throw ParseError(std::string("meta-path letter '") + c + "' matches several node types");
        found = static_cast<int>(t);
      }
    }
    if (found < 0) throw ParseError(std::string("meta-path letter '") + c + "' matches no node type");
    types.push_back(found);
  }

  for (std::size_t k = 0; k + 1 < types.size(); ++k) {
    const int x = types[k], y = types[k + 1];
    std::vector<int> fwd, rev;
    for (std::size_t r = 0; r < hin.num_relations(); ++r) {
      const auto& rel = hin.relations[r];
      if (rel.src_type == x && rel.dst_type == y) fwd.push_back(static_cast<int>(r));
      else if (rel.src_type == y && rel.dst_type == x) rev.push_back(static_cast<int>(r));
    }
    MetaPathStep step;
    if (fwd.size() == 1) {
      step.relation = fwd.front();
    } else if (fwd.empty() && rev.size() == 1) {
      step.relation = rev.front();
      step.direction = Direction::reverse;
    } else {
      throw ParseError("meta-path shorthand '" + mp.name + "': no unique relation between '" + hin.node_types[x] +
                       "' and '" + hin.node_types[y] + "'; use the explicit NAME=STEP form");
    }
    mp.steps.push_back(step);
  }
  if (flip_first) {
    auto& d = mp.steps.front().direction;
    d = d == Direction::forward ? Direction::reverse : Direction::forward;
  }
  check_metapath(hin, mp);
  return mp;
}

std::vector<MetaPath> parse_metapath_list(const Hin& hin, std::string_view spec) {
  std::vector<MetaPath> out;
  if (spec.find('=') != std::string_view::npos) {
    for (const auto& item : split(spec, ';')) {
      if (item.empty()) continue;
      out.push_back(parse_metapath(hin, item));
    }
  } else {
    for (const auto& item : split(spec, ',')) {
      if (item.empty()) continue;
      out.push_back(metapath_from_shorthand(hin, item));
    }
  }
  if (out.empty()) throw ParseError("no meta-paths given");
  std::set<std::string> names;
  for (const auto& mp : out)
    if (!names.insert(mp.name).second) throw ParseError("duplicate meta-path name '" + mp.name + "'");
  return out;
}

SpgemmResult spgemm(const CsrMatrix& a, const CsrMatrix& b, bool boolean, std::size_t nnz_budget) {
  if (a.cols != b.rows) throw DataError("spgemm: inner dimensions differ");
  SpgemmResult res;
  CsrMatrix& c = res.matrix;
  c.rows = a.rows;
  c.cols = b.cols;
  c.row_ptr.assign(1, 0);
  c.row_ptr.reserve(a.rows + 1);

  std::vector<std::uint64_t> acc(b.cols, 0);
  std::vector<char> used(b.cols, 0);
  std::vector<int> touched;
  for (std::size_t i = 0; i < a.rows; ++i) {
    touched.clear();
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const int k = a.col[p];
      const std::uint64_t av = a.val[p];
      for (std::size_t q = b.row_ptr[k]; q < b.row_ptr[k + 1]; ++q) {
        const int j = b.col[q];
        if (!used[j]) {
          used[j] = 1;
          touched.push_back(j);
        }
        if (boolean) {
          acc[j] = 1;
        } else {
          acc[j] = sat_add(acc[j], sat_mul(av, b.val[q], res.saturated), res.saturated);
        }
      }
    }
    std::sort(touched.begin(), touched.end());
    if (c.col.size() + touched.size() > nnz_budget)
      throw ResourceError("meta-path composition exceeds the density budget of " + std::to_string(nnz_budget) +
                          " nonzeros");
    for (int j : touched) {
      c.col.push_back(j);
      c.val.push_back(acc[j]);
      acc[j] = 0;
      used[j] = 0;
    }
    c.row_ptr.push_back(c.col.size());
  }
  return res;
}

CsrMatrix step_adjacency(const Hin& hin, const MetaPathStep& step) {
  const auto& r = hin.relations.at(step.relation);
  const bool fwd = step.direction == Direction::forward;
  const int row_type = fwd ? r.src_type : r.dst_type;
  const int col_type = fwd ? r.dst_type : r.src_type;
  const bool both = r.symmetric && r.src_type == r.dst_type;

  std::vector<std::pair<int, int>> entries;
  for (const auto& e : hin.edges) {
    if (e.relation != step.relation) continue;
    const int s = static_cast<int>(hin.local_index(e.src));
    const int d = static_cast<int>(hin.local_index(e.dst));
    if (fwd) entries.emplace_back(s, d);
    else entries.emplace_back(d, s);
    if (both) entries.emplace_back(fwd ? d : s, fwd ? s : d);
  }
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());

  CsrMatrix m;
  m.rows = hin.type_count(row_type);
  m.cols = hin.type_count(col_type);
  m.row_ptr.assign(m.rows + 1, 0);
  for (const auto& [s, d] : entries) ++m.row_ptr[s + 1];
  for (std::size_t i = 0; i < m.rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  m.col.reserve(entries.size());
  for (const auto& [s, d] : entries) m.col.push_back(d);
  m.val.assign(entries.size(), 1);
  return m;
}

std::vector<std::vector<int>> MetaPathSubGraph::neighbors() const {
  std::vector<std::vector<int>> nb(n);
  for (const auto& [u, v] : edges) {
    nb[u].push_back(v);
    nb[v].push_back(u);
  }
  for (auto& l : nb) std::sort(l.begin(), l.end());
  return nb;
}

MetaPathSubGraph materialize(const Hin& hin, const MetaPath& mp, const MaterializeOptions& opts) {
  check_metapath(hin, mp);
  const bool boolean = !opts.counts;
  CsrMatrix m = step_adjacency(hin, mp.steps.front());
  if (m.nnz() > opts.nnz_budget) throw ResourceError("meta-path adjacency exceeds the density budget");
  bool saturated = false;
  for (std::size_t k = 1; k < mp.steps.size(); ++k) {
    auto r = spgemm(m, step_adjacency(hin, mp.steps[k]), boolean, opts.nnz_budget);
    saturated = saturated || r.saturated;
    m = std::move(r.matrix);
  }

  MetaPathSubGraph sg;
  sg.metapath = mp;
  sg.n = hin.type_count(hin.target_type);
  const bool pal = is_palindromic(hin, mp);

  struct Entry {
    int u, v;
    std::uint64_t c;
  };
  std::vector<Entry> entries;
  for (std::size_t u = 0; u < m.rows; ++u) {
    for (std::size_t p = m.row_ptr[u]; p < m.row_ptr[u + 1]; ++p) {
      const int v = m.col[p];
      if (v == static_cast<int>(u)) continue;
      if (pal) {
        // The count matrix is symmetric and each instance read backwards is
        // the same instance, so only the upper triangle is taken.
        if (static_cast<int>(u) < v) entries.push_back({static_cast<int>(u), v, m.val[p]});
      } else {
        entries.push_back({std::min<int>(u, v), std::max<int>(u, v), m.val[p]});
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  for (const auto& e : entries) {
    if (!sg.edges.empty() && sg.edges.back() == std::pair{e.u, e.v}) {
      if (opts.counts) sg.counts.back() = sat_add(sg.counts.back(), e.c, saturated);
      continue;
    }
    sg.edges.emplace_back(e.u, e.v);
    if (opts.counts) sg.counts.push_back(e.c);
  }
  sg.saturated = saturated;
  return sg;
}

std::vector<std::uint8_t> IntegratedSubGraph::encoding(std::size_t e) const {
  const std::size_t p = metapaths.size();
  return {bits.begin() + e * p, bits.begin() + (e + 1) * p};
}

IntegratedSubGraph integrate(const std::vector<MetaPathSubGraph>& subgraphs) {
  if (subgraphs.empty()) throw ArgumentError("integrate: empty sub-graph list");
  IntegratedSubGraph g;
  g.n = subgraphs.front().n;
  for (const auto& sg : subgraphs) {
    if (sg.n != g.n) throw DataError("integrate: mismatched node universes");
    g.metapaths.push_back(sg.metapath.name);
  }
  const std::size_t p = subgraphs.size();
  std::vector<std::pair<std::pair<int, int>, std::size_t>> all;
  for (std::size_t i = 0; i < p; ++i)
    for (const auto& e : subgraphs[i].edges) all.push_back({e, i});
  std::sort(all.begin(), all.end());
  for (const auto& [e, i] : all) {
    if (g.edges.empty() || g.edges.back() != e) {
      g.edges.push_back(e);
      g.bits.resize(g.bits.size() + p, 0);
    }
    g.bits[(g.edges.size() - 1) * p + i] = 1;
  }
  return g;
}

std::map<int, int> connectivity_vector(const std::vector<MetaPathSubGraph>& subgraphs, int i) {
  if (subgraphs.empty()) throw ArgumentError("connectivity_vector: empty sub-graph list");
  const std::size_t n = subgraphs.front().n;
  if (i < 0 || static_cast<std::size_t>(i) >= n) throw DataError("connectivity_vector: node out of range");
  std::map<int, int> c;
  for (const auto& sg : subgraphs) {
    if (sg.n != n) throw DataError("connectivity_vector: mismatched node universes");
    for (const auto& [u, v] : sg.edges) {
      if (u == i) ++c[v];
      else if (v == i) ++c[u];
    }
  }
  c.erase(i);
  return c;
}

std::vector<std::map<int, int>> connectivity_all(const std::vector<MetaPathSubGraph>& subgraphs) {
  if (subgraphs.empty()) throw ArgumentError("connectivity_all: empty sub-graph list");
  const std::size_t n = subgraphs.front().n;
  std::vector<std::map<int, int>> c(n);
  for (const auto& sg : subgraphs) {
    if (sg.n != n) throw DataError("connectivity_all: mismatched node universes");
    for (const auto& [u, v] : sg.edges) {
      if (u == v) continue;
      ++c[u][v];
      ++c[v][u];
    }
  }
  return c;
}

double homophily_ratio(const MetaPathSubGraph& sg, const std::vector<int>& labels) {
  if (sg.edges.empty()) throw ArgumentError("homophily_ratio: empty edge set");
  std::size_t same = 0;
  for (const auto& [u, v] : sg.edges) {
    if (static_cast<std::size_t>(std::max(u, v)) >= labels.size() || labels[u] < 0 || labels[v] < 0)
      throw DataError("homophily_ratio: unlabeled endpoint");
    if (labels[u] == labels[v]) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(sg.edges.size());
}

double jaccard_similarity(const MetaPathSubGraph& a, const MetaPathSubGraph& b) {
  require_same_universe(a, b);
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.edges.size() + b.edges.size() - inter;
  if (uni == 0) throw ArgumentError("jaccard_similarity: both edge sets are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double coverage_ratio(const MetaPathSubGraph& a, const MetaPathSubGraph& b) {
  require_same_universe(a, b);
  if (b.edges.empty()) {
    if (a.edges.empty()) return 1.0;
    throw ArgumentError("coverage_ratio: the covered edge set is empty");
  }
  return static_cast<double>(intersection_size(a, b)) / static_cast<double>(b.edges.size());
}

std::vector<std::vector<int>> enumerate_combinations(std::size_t count, std::size_t min_size) {
  if (min_size < 1 || min_size > count) throw ArgumentError("enumerate_combinations: min_size out of range");
  std::vector<std::vector<int>> out;
  for (std::size_t k = min_size; k <= count; ++k) {
    std::vector<int> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = static_cast<int>(i);
    while (true) {
      out.push_back(idx);
      // Advance to the next lexicographic k-subset.
      int pos = static_cast<int>(k) - 1;
      while (pos >= 0 && idx[pos] == static_cast<int>(count - k + pos)) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (std::size_t j = pos + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

}  // namespace lamp
