#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sahc/hierarchy.hpp"
#include "sahc/rng.hpp"

#include <json.hpp>

#include <string>
#include <vector>

using sahc::HierarchySpec;

namespace {

// Builds a document with the requested level sizes; parents are assigned
// round-robin so every class has at least one child.
std::string make_doc(const std::vector<int>& sizes) {
  nlohmann::json doc;
  for (size_t h = 0; h < sizes.size(); ++h) {
    std::vector<std::string> names;
    for (int c = 0; c < sizes[h]; ++c)
      names.push_back("l" + std::to_string(h + 1) + "c" + std::to_string(c));
    doc["levels"].push_back(names);
  }
  doc["parents"] = nlohmann::json::array();
  for (size_t h = 1; h < sizes.size(); ++h) {
    std::vector<int> parents(sizes[h]);
    for (int c = 0; c < sizes[h]; ++c) parents[c] = c % sizes[h - 1];
    doc["parents"].push_back(parents);
  }
  return doc.dump();
}

// Random tree with strictly growing level sizes; parents drawn at random,
// then patched so no class is childless.
HierarchySpec random_spec(sahc::Rng& rng, int levels, int max_growth = 4) {
  std::vector<int> sizes{2 + static_cast<int>(rng.integer(3))};
  for (int h = 1; h < levels; ++h)
    sizes.push_back(sizes.back() + 1 + static_cast<int>(rng.integer(max_growth)));
  std::vector<std::vector<std::string>> names(levels);
  for (int h = 0; h < levels; ++h)
    for (int c = 0; c < sizes[h]; ++c)
      names[h].push_back("n" + std::to_string(h) + "_" + std::to_string(c));
  std::vector<std::vector<int>> parents;
  for (int h = 1; h < levels; ++h) {
    std::vector<int> p(sizes[h]);
    for (int c = 0; c < sizes[h]; ++c)
      c < sizes[h - 1] ? p[c] = c
                       : p[c] = static_cast<int>(rng.integer(sizes[h - 1]));
    parents.push_back(p);
  }
  return HierarchySpec::from_parts(names, parents);
}

}  // namespace

TEST_CASE("parse accepts the three-level 8/24/45 document") {
  HierarchySpec spec = HierarchySpec::parse(make_doc({8, 24, 45}));
  CHECK(spec.num_levels() == 3);
  CHECK(spec.class_count(0) == 8);
  CHECK(spec.class_count(1) == 24);
  CHECK(spec.class_count(2) == 45);
}

TEST_CASE("parse accepts a single-level document") {
  HierarchySpec spec = HierarchySpec::parse(make_doc({4}));
  CHECK(spec.num_levels() == 1);
  CHECK(spec.class_count(0) == 4);
}

TEST_CASE("parse rejects bad documents") {
  // dangling parent: level-3 class pointing at index 99 of a 7-class level 2
  nlohmann::json doc = nlohmann::json::parse(make_doc({3, 7, 12}));
  doc["parents"][1][0] = 99;
  CHECK_THROWS_WITH_AS(HierarchySpec::parse(doc.dump()),
                       doctest::Contains("dangling parent"),
                       std::runtime_error);

  // duplicate class id within a level
  doc = nlohmann::json::parse(make_doc({3, 7, 12}));
  doc["levels"][1][2] = doc["levels"][1][1];
  CHECK_THROWS_WITH_AS(HierarchySpec::parse(doc.dump()),
                       doctest::Contains("duplicate class id"),
                       std::runtime_error);

  // non-increasing level sizes
  CHECK_THROWS_WITH_AS(HierarchySpec::parse(make_doc({5, 5})),
                       doctest::Contains("strictly increase"),
                       std::runtime_error);

  // childless class at level 1
  doc = nlohmann::json::parse(make_doc({2, 3}));
  doc["parents"][0] = {0, 0, 0};
  CHECK_THROWS_WITH_AS(HierarchySpec::parse(doc.dump()),
                       doctest::Contains("no children"), std::runtime_error);

  // one-class level
  CHECK_THROWS_WITH_AS(HierarchySpec::parse(make_doc({1})),
                       doctest::Contains("at least 2"), std::runtime_error);

  // not JSON at all
  CHECK_THROWS_WITH_AS(HierarchySpec::parse("levels: nope"),
                       doctest::Contains("malformed"), std::runtime_error);
}

TEST_CASE("json round trip") {
  HierarchySpec spec = HierarchySpec::parse(make_doc({3, 7, 12}));
  HierarchySpec again = HierarchySpec::parse(spec.to_json());
  CHECK(again.num_levels() == 3);
  for (int h = 0; h < 3; ++h) {
    CHECK(again.class_count(h) == spec.class_count(h));
    CHECK(again.class_names(h) == spec.class_names(h));
  }
}

TEST_CASE("indicator matrix shape and row structure") {
  HierarchySpec spec = HierarchySpec::parse(make_doc({3, 7, 12}));
  sahc::IndicatorMatrix ind = indicator_matrix(spec, 2, 0);
  CHECK(ind.entries.rows() == 12);
  CHECK(ind.entries.cols() == 3);
  for (int i = 0; i < 12; ++i) CHECK(ind.entries.row(i).sum() == 1.0);

  CHECK_THROWS_AS(indicator_matrix(spec, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(indicator_matrix(spec, 1, 1), std::invalid_argument);
}

TEST_CASE("two fine classes sharing one parent give a column of ones") {
  HierarchySpec spec =
      HierarchySpec::from_parts({{"a", "b"}, {"x", "y", "z"}}, {{0, 0, 1}});
  sahc::IndicatorMatrix ind = indicator_matrix(spec, 1, 0);
  CHECK(ind.entries(0, 0) == 1.0);
  CHECK(ind.entries(1, 0) == 1.0);
  CHECK(ind.entries(2, 1) == 1.0);
  CHECK(ind.entries.col(0).sum() == 2.0);
}

TEST_CASE("distant indicators compose as boolean chain products") {
  sahc::Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    HierarchySpec spec = random_spec(rng, 3);
    Eigen::MatrixXd direct = indicator_matrix(spec, 2, 0).entries;
    Eigen::MatrixXd chained = indicator_matrix(spec, 2, 1).entries *
                              indicator_matrix(spec, 1, 0).entries;
    // chain-walk oracle: every leaf's two-step ascent
    for (int i = 0; i < spec.class_count(2); ++i) {
      const int expected = spec.parent_of(1, spec.parent_of(2, i));
      CHECK(direct(i, expected) == 1.0);
      CHECK(direct.row(i).sum() == 1.0);
    }
    CHECK((direct - chained).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("pair_count") {
  CHECK(sahc::pair_count(3) == 3);
  CHECK(sahc::pair_count(1) == 0);
  CHECK(sahc::pair_count(4) == 6);
  CHECK_THROWS_AS(sahc::pair_count(0), std::invalid_argument);
}

TEST_CASE("lift_labels ascends the parent chain") {
  HierarchySpec spec = HierarchySpec::from_parts(
      {{"a", "b"}, {"p", "q", "r"}, {"u", "v", "w", "x"}},
      {{0, 1, 1}, {0, 1, 2, 2}});
  auto lifted = spec.lift_labels({3});
  CHECK(lifted[2][0] == 3);
  CHECK(lifted[1][0] == 2);  // parent of x is r
  CHECK(lifted[0][0] == 1);  // parent of r is b

  CHECK_THROWS_AS(spec.lift_labels({9}), std::out_of_range);
  CHECK_THROWS_AS(spec.lift_labels({-1}), std::out_of_range);
}

TEST_CASE("lift_labels is the identity for one level") {
  HierarchySpec spec = HierarchySpec::parse(make_doc({4}));
  auto lifted = spec.lift_labels({2, 0, 3});
  CHECK(lifted.size() == 1);
  CHECK(lifted[0] == std::vector<int>{2, 0, 3});
}

TEST_CASE("lifting every fine class counts descendants per macroclass") {
  sahc::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    HierarchySpec spec = random_spec(rng, 3);
    std::vector<int> all(spec.class_count(2));
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    auto lifted = spec.lift_labels(all);
    for (int h = 0; h < 2; ++h) {
      // tree-walk oracle: descendant count per class at level h
      std::vector<int> expected(spec.class_count(h), 0);
      for (int leaf = 0; leaf < spec.class_count(2); ++leaf)
        expected[spec.ancestor_at(2, leaf, h)] += 1;
      std::vector<int> seen(spec.class_count(h), 0);
      for (int label : lifted[h]) seen[label] += 1;
      CHECK(seen == expected);
    }
  }
}

TEST_CASE("lift and indicator agree") {
  sahc::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    HierarchySpec spec = random_spec(rng, 3);
    Eigen::MatrixXd ind = indicator_matrix(spec, 2, 0).entries;
    std::vector<int> all(spec.class_count(2));
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    auto lifted = spec.lift_labels(all);
    for (int i = 0; i < spec.class_count(2); ++i)
      CHECK(ind(i, lifted[0][i]) == 1.0);
  }
}
