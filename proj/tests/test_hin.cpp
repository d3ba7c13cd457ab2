#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "lamp/error.hpp"
#include "lamp/hin.hpp"

using namespace lamp;

namespace {

const std::string kFixture = std::string(LAMP_FIXTURE_DIR) + "/toy_acm.json";

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::multiset<std::tuple<std::string, std::string, std::string>> edge_multiset(const Hin& h) {
  std::multiset<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& e : h.edges) out.insert({h.node_key[e.src], h.node_key[e.dst], h.relations[e.relation].name});
  return out;
}

}  // namespace

TEST_CASE("toy fixture loads with the expected counts") {
  Hin h = load_hin(kFixture);
  CHECK(h.num_nodes() == 6);
  CHECK(h.num_relations() == 2);
  CHECK(h.edges.size() == 6);
  CHECK(h.num_types() == 3);
  CHECK(h.node_types[h.target_type] == "paper");
  CHECK(h.type_count(h.type_id("paper")) == 3);
  CHECK(h.type_count(h.type_id("author")) == 2);
  CHECK(h.type_count(h.type_id("subject")) == 1);
  CHECK(h.target_labels() == std::vector<int>{0, 0, 1});
  CHECK(h.num_classes() == 2);
  CHECK(validate(h).ok());
}

TEST_CASE("type blocks are contiguous") {
  Hin h = load_hin(kFixture);
  for (std::size_t t = 0; t < h.num_types(); ++t)
    for (std::size_t k = 0; k < h.type_count(static_cast<int>(t)); ++k) {
      const int id = static_cast<int>(h.type_offset(static_cast<int>(t)) + k);
      CHECK(h.node_type[id] == static_cast<int>(t));
      CHECK(h.local_index(id) == k);
    }
}

TEST_CASE("dangling edge reference is rejected") {
  std::string doc = read_text(kFixture);
  const auto pos = doc.find("[\"p2\", \"s0\", \"PS\"]");
  REQUIRE(pos != std::string::npos);
  doc.insert(pos, "[\"p2\", \"a9\", \"PA\"],\n    ");
  CHECK_THROWS_AS(parse_hin(doc), DataError);
  try {
    parse_hin(doc);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("a9") != std::string::npos);
  }
}

TEST_CASE("malformed documents raise parse errors") {
  CHECK_THROWS_AS(parse_hin("{"), ParseError);
  CHECK_THROWS_AS(parse_hin("[]"), ParseError);
  CHECK_THROWS_AS(parse_hin("{\"node_types\": [\"a\"]}"), ParseError);
}

TEST_CASE("relation signature violations are rejected") {
  std::string doc = read_text(kFixture);
  const auto pos = doc.find("[\"p2\", \"s0\", \"PS\"]");
  doc.insert(pos, "[\"a0\", \"s0\", \"PA\"],\n    ");
  CHECK_THROWS_AS(parse_hin(doc), DataError);
}

TEST_CASE("one-hot id features") {
  Hin h = load_hin(kFixture);
  SUBCASE("three nodes") {
    auto f = one_hot_id_features(h, h.type_id("paper"));
    REQUIRE(f.size() == 3);
    CHECK(f[0] == std::vector<double>{1, 0, 0});
    CHECK(f[1] == std::vector<double>{0, 1, 0});
    CHECK(f[2] == std::vector<double>{0, 0, 1});
  }
  SUBCASE("one node") {
    auto f = one_hot_id_features(h, h.type_id("subject"));
    REQUIRE(f.size() == 1);
    CHECK(f[0] == std::vector<double>{1});
  }
  SUBCASE("authors are orthonormal") {
    auto f = one_hot_id_features(h, h.type_id("author"));
    REQUIRE(f.size() == 2);
    for (std::size_t a = 0; a < f.size(); ++a)
      for (std::size_t b = 0; b < f.size(); ++b) {
        double dot = 0;
        for (std::size_t k = 0; k < f[a].size(); ++k) dot += f[a][k] * f[b][k];
        CHECK(dot == (a == b ? 1.0 : 0.0));
      }
  }
}

TEST_CASE("relation one-hot") {
  Hin h = load_hin(kFixture);
  CHECK(relation_one_hot(h, 0) == std::vector<double>{1, 0});
  CHECK(relation_one_hot(h, 1) == std::vector<double>{0, 1});
  CHECK_THROWS_AS(relation_one_hot(h, 2), DataError);
}

TEST_CASE("feature matrix falls back to one-hot ids") {
  Hin h = load_hin(kFixture);
  Matrix x = type_feature_matrix(h, h.type_id("author"));
  CHECK(x == Matrix::identity(2));
}

TEST_CASE("save and load round-trip") {
  Hin h = load_hin(kFixture);
  const auto dir = std::filesystem::temp_directory_path() / "lamp_test_hin";
  std::filesystem::create_directories(dir);
  const auto path = dir / "roundtrip.json";
  save_hin(h, path);
  Hin r = load_hin(path);
  CHECK(r.num_nodes() == h.num_nodes());
  CHECK(r.node_key == h.node_key);
  CHECK(r.node_type == h.node_type);
  CHECK(r.labels == h.labels);
  CHECK(edge_multiset(r) == edge_multiset(h));
  CHECK(r.target_type == h.target_type);
  CHECK(dump_hin(r) == dump_hin(h));
  std::filesystem::remove_all(dir);
}

TEST_CASE("symmetric same-type relation is symmetrized on load") {
  const std::string doc = R"({
    "node_types": ["paper"],
    "relations": [{"name": "PP", "src": "paper", "dst": "paper", "symmetric": true}],
    "target_type": "paper",
    "nodes": [{"id": "p0", "type": "paper"}, {"id": "p1", "type": "paper"}],
    "edges": [["p0", "p1", "PP"]]
  })";
  Hin h = parse_hin(doc);
  CHECK(h.relations[0].symmetric);
  CHECK(validate(h).ok());
}
