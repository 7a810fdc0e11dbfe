#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "mtmc/assignment.hpp"

namespace mtmc {
namespace {

struct Best {
  int cardinality = -1;
  double cost = 0.0;
};

// Exhaustive search over injective partial maps rows -> cols.
void search(const CostMatrix& c, std::size_t row, std::vector<bool>& used, int card, double cost,
            Best& best) {
  if (row == c.size()) {
    if (card > best.cardinality || (card == best.cardinality && cost < best.cost - 1e-12)) {
      best = {card, cost};
    }
    return;
  }
  search(c, row + 1, used, card, cost, best);
  for (std::size_t j = 0; j < c[row].size(); ++j) {
    if (used[j] || c[row][j] == kForbidden) continue;
    used[j] = true;
    search(c, row + 1, used, card + 1, cost + c[row][j], best);
    used[j] = false;
  }
}

TEST(Assignment, EmptyMatrix) {
  EXPECT_TRUE(solve_assignment({}).empty());
  EXPECT_EQ(solve_assignment({{}, {}}), (std::vector<int>{-1, -1}));
}

TEST(Assignment, PrefersCardinalityOverCost) {
  // Taking (0,0) alone is cheapest, but (0,1)+(1,0) matches both rows.
  const CostMatrix c{{0.0, 0.9}, {0.8, kForbidden}};
  EXPECT_EQ(solve_assignment(c), (std::vector<int>{1, 0}));
}

TEST(Assignment, AllForbiddenRowStaysUnassigned) {
  const CostMatrix c{{kForbidden, kForbidden}, {0.2, 0.1}};
  EXPECT_EQ(solve_assignment(c), (std::vector<int>{-1, 1}));
}

TEST(Assignment, MatchesExhaustiveSearch) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const int rows = dim(rng), cols = dim(rng);
    CostMatrix c(rows, std::vector<double>(cols));
    for (auto& r : c) {
      for (auto& v : r) v = u(rng) < 0.3 ? kForbidden : u(rng);
    }
    const auto got = solve_assignment(c);
    ASSERT_EQ(got.size(), std::size_t(rows));
    int card = 0;
    double cost = 0.0;
    std::vector<bool> seen(cols, false);
    for (int i = 0; i < rows; ++i) {
      if (got[i] < 0) continue;
      ASSERT_LT(got[i], cols);
      ASSERT_FALSE(seen[got[i]]);
      seen[got[i]] = true;
      ASSERT_NE(c[i][got[i]], kForbidden);
      ++card;
      cost += c[i][got[i]];
    }
    std::vector<bool> used(cols, false);
    Best best;
    search(c, 0, used, 0, 0.0, best);
    EXPECT_EQ(card, best.cardinality) << "trial " << trial;
    EXPECT_NEAR(cost, best.cost, 1e-9) << "trial " << trial;
  }
}

}  // namespace
}  // namespace mtmc
