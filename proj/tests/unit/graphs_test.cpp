#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "kcgn/error.hpp"
#include "kcgn/graphs.hpp"
#include "kcgn/rng.hpp"

namespace kcgn {
namespace {

using Edges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

TimeCodec day_codec() { return TimeCodec::fit({0}, 86400, 4); }

TEST(MultiTyped, SingleRecord) {
  std::vector<InteractionRecord> r = {{0, 0, 0, 5}};
  auto g = build_multityped_graph(r, 1, 1, 2, day_codec());
  EXPECT_EQ(g.vertex_count(), 3u);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.user_degree, (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(g.sub_vertex_degree, (std::vector<std::uint32_t>{1, 0}));
}

TEST(MultiTyped, EmptyRecords) {
  auto g = build_multityped_graph({}, 3, 2, 2, day_codec());
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.user_degree, (std::vector<std::uint32_t>(3, 0)));
  EXPECT_EQ(g.sub_vertex_degree, (std::vector<std::uint32_t>(4, 0)));
}

TEST(MultiTyped, DuplicateKeepsLatest) {
  std::vector<InteractionRecord> r = {{0, 1, 1, 200000}, {0, 1, 1, 10}, {0, 1, 0, 10}};
  auto g = build_multityped_graph(r, 1, 2, 2, day_codec());
  ASSERT_EQ(g.edges.size(), 2u);
  auto it = std::find_if(g.edges.begin(), g.edges.end(),
                         [&](const TypedEdge& e) { return e.sub_vertex == g.sub_vertex(1, 1); });
  ASSERT_NE(it, g.edges.end());
  EXPECT_EQ(it->timestamp, 200000);
  EXPECT_EQ(it->slot, 2);
}

TEST(MultiTyped, DegreesEqualEdgeTallies) {
  Rng rng(1);
  std::vector<InteractionRecord> r;
  for (int i = 0; i < 300; ++i) {
    r.push_back({static_cast<std::uint32_t>(rng.below(10)), static_cast<std::uint32_t>(rng.below(12)),
                 static_cast<std::uint32_t>(rng.below(3)), static_cast<std::int64_t>(rng.below(1000000))});
  }
  auto g = build_multityped_graph(r, 10, 12, 3, day_codec());
  std::vector<std::uint32_t> ud(10, 0), vd(36, 0);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    ++ud[g.edges[i].user];
    ++vd[g.edges[i].sub_vertex];
    if (i > 0) {
      auto prev = std::pair(g.edges[i - 1].user, g.edges[i - 1].sub_vertex);
      EXPECT_LT(prev, std::pair(g.edges[i].user, g.edges[i].sub_vertex));
    }
  }
  EXPECT_EQ(ud, g.user_degree);
  EXPECT_EQ(vd, g.sub_vertex_degree);
}

TEST(MultiTyped, OutOfRangeNamesRecord) {
  std::vector<InteractionRecord> r = {{0, 0, 0, 1}, {0, 5, 0, 1}};
  try {
    build_multityped_graph(r, 1, 2, 1, day_codec());
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Social, OneWayEdgeBecomesSymmetric) {
  Edges e = {{0, 1}};
  auto g = build_social_graph(e, 3);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_TRUE(g.neighbors(2).empty());
}

TEST(Social, EmptyGivesSingletons) {
  auto g = build_social_graph({}, 4);
  EXPECT_EQ(g.components().count(), 4u);
}

TEST(Social, TriangleIsOneComponent) {
  Edges e = {{0, 1}, {1, 2}, {0, 2}};
  auto g = build_social_graph(e, 3);
  EXPECT_EQ(g.components().count(), 1u);
  EXPECT_EQ(g.components().sizes[0], 3u);
}

TEST(Social, SelfEdgeDropped) {
  Edges e = {{0, 0}, {0, 1}, {1, 0}};
  auto g = build_social_graph(e, 2);
  EXPECT_EQ(g.dropped_self_edges(), 1u);
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_EQ(g.adjacency().at(0, 0), 0.0);
}

TEST(Social, OutOfRangeThrows) {
  Edges e = {{0, 3}};
  EXPECT_THROW(build_social_graph(e, 3), IngestionError);
}

TEST(ItemCategories, Examples) {
  Edges same = {{0, 5}, {1, 5}, {2, 6}};
  auto g = build_item_graph_categories(same, 3);
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_TRUE(g.has_edge(0, 1));

  Edges distinct = {{0, 0}, {1, 1}, {2, 2}};
  EXPECT_EQ(build_item_graph_categories(distinct, 3).edge_count(), 0u);

  Edges four = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  CategoryGraphOptions o;
  o.max_edges_per_category = 6;
  EXPECT_EQ(build_item_graph_categories(four, 4, o).edge_count(), 6u);

  Edges bad = {{4, 0}};
  EXPECT_THROW(build_item_graph_categories(bad, 4), IngestionError);
}

TEST(ItemCategories, LargeCategoryIsCapped) {
  Edges members;
  for (std::uint32_t i = 0; i < 200; ++i) members.push_back({i, 0});
  CategoryGraphOptions o;
  o.max_edges_per_category = 500;
  auto g = build_item_graph_categories(members, 200, o);
  // a full clique would have 19900 edges
  EXPECT_LE(g.edge_count(), 500u);
  EXPECT_GT(g.edge_count(), 0u);
}

TEST(ItemCoInteraction, Examples) {
  std::vector<InteractionRecord> same = {{0, 0, 0, 1}, {0, 1, 0, 2}};
  EXPECT_TRUE(build_item_graph_cointeraction(same, 2, 2, 1).has_edge(0, 1));
  std::vector<InteractionRecord> mixed = {{0, 0, 0, 1}, {0, 1, 1, 2}};
  EXPECT_EQ(build_item_graph_cointeraction(mixed, 2, 2, 1).edge_count(), 0u);
  EXPECT_EQ(build_item_graph_cointeraction(same, 2, 2, 2).edge_count(), 0u);
}

TEST(ItemCoInteraction, MatchesBruteForce) {
  Rng rng(2);
  std::vector<InteractionRecord> r;
  for (int i = 0; i < 120; ++i) {
    r.push_back({static_cast<std::uint32_t>(rng.below(15)), static_cast<std::uint32_t>(rng.below(12)),
                 static_cast<std::uint32_t>(rng.below(2)), i});
  }
  for (std::size_t threshold : {1u, 2u, 3u}) {
    auto g = build_item_graph_cointeraction(r, 12, 2, threshold);
    for (std::uint32_t a = 0; a < 12; ++a)
      for (std::uint32_t b = a + 1; b < 12; ++b) {
        std::size_t common = 0;
        for (std::uint32_t u = 0; u < 15; ++u) {
          bool hit = false;
          for (std::uint32_t k = 0; k < 2 && !hit; ++k) {
            auto has = [&](std::uint32_t item) {
              return std::any_of(r.begin(), r.end(), [&](const InteractionRecord& x) {
                return x.user == u && x.item == item && x.type == k;
              });
            };
            hit = has(a) && has(b);
          }
          common += hit;
        }
        EXPECT_EQ(g.has_edge(a, b), common >= threshold) << a << "," << b << " t=" << threshold;
      }
  }
}

Eigen::MatrixXd dense_normalized(std::size_t n, const Edges& edges) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (auto [x, y] : edges) {
    if (x == y) continue;
    a(x, y) = 1.0;
    a(y, x) = 1.0;
  }
  Eigen::VectorXd d = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * a * d.asDiagonal();
}

TEST(Normalize, Examples) {
  Edges tri = {{0, 1}, {1, 2}, {0, 2}};
  auto t = build_social_graph(tri, 3).normalized();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(t.at(i, j), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(build_social_graph({}, 1).normalized().at(0, 0), 1.0);
  Edges path = {{0, 1}};
  auto p = build_social_graph(path, 2).normalized();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(p.at(i, j), 0.5, 1e-15);
}

TEST(Normalize, DenseOracleSymmetryAndSpectrum) {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    const double density = rng.uniform(0.0, 0.3);
    Edges e;
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = i + 1; j < n; ++j)
        if (rng.uniform() < density) e.push_back({i, j});
    auto g = build_social_graph(e, n);
    Eigen::MatrixXd want = dense_normalized(n, e);
    Eigen::MatrixXd got(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) got(i, j) = g.normalized().at(i, j);
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(got, got.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(got);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1.0 - 1e-12);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(Components, Examples) {
  Edges tri = {{0, 1}, {1, 2}, {0, 2}};
  EXPECT_EQ(build_social_graph(tri, 4).components().count(), 2u);
  EXPECT_EQ(build_social_graph({}, 5).components().count(), 5u);
  Edges chain = {{0, 1}, {1, 2}, {2, 3}};
  EXPECT_EQ(build_social_graph(chain, 4).components().count(), 1u);
}

TEST(Components, InvariantUnderRelabeling) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(25);
    Edges e;
    for (int k = 0; k < static_cast<int>(n); ++k) {
      auto a = static_cast<std::uint32_t>(rng.below(n)), b = static_cast<std::uint32_t>(rng.below(n));
      if (a != b) e.push_back({a, b});
    }
    auto perm = rng.permutation(n);
    Edges pe;
    for (auto [a, b] : e)
      pe.push_back({static_cast<std::uint32_t>(perm[a]), static_cast<std::uint32_t>(perm[b])});
    auto c1 = build_social_graph(e, n).components();
    auto c2 = build_social_graph(pe, n).components();
    ASSERT_EQ(c1.count(), c2.count());
    std::map<std::size_t, std::size_t> fwd, back;
    for (std::size_t v = 0; v < n; ++v) {
      auto [it1, new1] = fwd.emplace(c1.labels[v], c2.labels[perm[v]]);
      auto [it2, new2] = back.emplace(c2.labels[perm[v]], c1.labels[v]);
      EXPECT_EQ(it1->second, c2.labels[perm[v]]);
      EXPECT_EQ(it2->second, c1.labels[v]);
    }
  }
}

TEST(Components, EdgesNeverCrossLabels) {
  Edges e = {{0, 3}, {3, 5}, {1, 2}};
  auto g = build_social_graph(e, 6);
  const auto& c = g.components();
  for (auto [a, b] : e) EXPECT_EQ(c.labels[a], c.labels[b]);
  EXPECT_NE(c.labels[0], c.labels[1]);
  EXPECT_EQ(c.labels[0], 0u);  // numbered by first node
}

}  // namespace
}  // namespace kcgn
