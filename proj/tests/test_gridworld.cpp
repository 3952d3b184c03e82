#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "empathic/coexistence.hpp"
#include "empathic/gridworld.hpp"

namespace empathic {
namespace {

TEST(ApplyMove, ClampsAtBoundary) {
  const GridSpec grid(4, 4);
  EXPECT_EQ(apply_move(grid, {0, 0}, Action::Up), (Position{0, 0}));
  EXPECT_EQ(apply_move(grid, {0, 0}, Action::Left), (Position{0, 0}));
  EXPECT_EQ(apply_move(grid, {3, 3}, Action::Right), (Position{3, 3}));
  EXPECT_EQ(apply_move(grid, {2, 2}, Action::NoOp), (Position{2, 2}));
  EXPECT_EQ(apply_move(grid, {2, 2}, Action::Up), (Position{1, 2}));
  EXPECT_EQ(apply_move(grid, {2, 2}, Action::Right), (Position{2, 3}));
}

TEST(ApplyMove, ExhaustiveAgainstBoundsOracle) {
  const GridSpec grid(4, 4);
  const int dr[] = {-1, 1, 0, 0, 0};
  const int dc[] = {0, 0, -1, 1, 0};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      for (int a = 0; a < kNumActions; ++a) {
        const int nr = r + dr[a];
        const int nc = c + dc[a];
        const bool inside = nr >= 0 && nr < 4 && nc >= 0 && nc < 4;
        const Position expected = inside ? Position{nr, nc} : Position{r, c};
        const Position got = apply_move(grid, {r, c}, action_from_index(a));
        EXPECT_EQ(got, expected);
        EXPECT_TRUE(grid.contains(got));
      }
}

TEST(EncodeField, LoneAgent) {
  const GridSpec grid(8, 8);
  const Position me{4, 4};
  const auto f = encode_field(grid, [&](Position p) { return p == me ? 1.0 : 0.0; }, me);
  ASSERT_EQ(f.size(), 25u);
  for (int i = 0; i < 25; ++i) EXPECT_EQ(f[static_cast<std::size_t>(i)], i == kFieldCenter ? 1.0 : 0.0);
}

TEST(EncodeField, NeighbourToTheRight) {
  const GridSpec grid(8, 8);
  const Position robot{3, 3};
  const Position cat{3, 4};
  const auto f = encode_field(
      grid, [&](Position p) { return p == robot ? 1.0 : (p == cat ? -1.0 : 0.0); }, robot);
  for (int i = 0; i < 25; ++i) {
    const double expected = i == 12 ? 1.0 : (i == 13 ? -1.0 : 0.0);
    EXPECT_EQ(f[static_cast<std::size_t>(i)], expected) << i;
  }
}

TEST(EncodeField, OffGridCellsReadZero) {
  const GridSpec grid(8, 8);
  // every cell on the grid reads 5 so padding is visible
  const auto f = encode_field(grid, [](Position) { return 5.0; }, Position{0, 0});
  for (int dr = 0; dr < 5; ++dr)
    for (int dc = 0; dc < 5; ++dc) {
      const bool inside = dr >= 2 && dc >= 2;
      EXPECT_EQ(f[static_cast<std::size_t>(5 * dr + dc)], inside ? 5.0 : 0.0);
    }
}

TEST(EncodeField, WindowOracle) {
  const GridSpec grid(7, 6);
  auto value = [&](Position p) { return static_cast<double>(grid.index_of(p) + 1); };
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c) {
      const auto f = encode_field(grid, value, Position{r, c});
      for (int i = 0; i < 25; ++i) {
        const Position p{r + i / 5 - 2, c + i % 5 - 2};
        EXPECT_EQ(f[static_cast<std::size_t>(i)], grid.contains(p) ? value(p) : 0.0);
      }
      EXPECT_EQ(f[kFieldCenter], value({r, c}));
    }
}

TEST(SwapPerspective, ExchangesAgents) {
  const CoexistenceState s{{1, 1}, Position{3, 3}, 0, true, false};
  const auto imagined = swap_perspective(s);
  ASSERT_TRUE(imagined.has_value());
  EXPECT_EQ(imagined->world.robot, (Position{3, 3}));
  EXPECT_EQ(imagined->world.cat, (Position{1, 1}));
  EXPECT_EQ(imagined->center, (Position{3, 3}));
}

TEST(SwapPerspective, IsAnInvolution) {
  const CoexistenceState s{{0, 5}, Position{6, 2}, 17, true, false};
  const auto once = swap_perspective(s);
  ASSERT_TRUE(once.has_value());
  const auto twice = swap_perspective(once->world);
  ASSERT_TRUE(twice.has_value());
  EXPECT_EQ(twice->world, s);
  EXPECT_EQ(twice->center, s.robot);
}

TEST(SwapPerspective, NoCounterpart) {
  const CoexistenceState s{{2, 2}, std::nullopt, 3, true, false};
  EXPECT_FALSE(swap_perspective(s).has_value());
}

TEST(SwapPerspective, AdjacentSwapMirrorsTheField) {
  const GridSpec grid(6, 6);
  const CoexistenceEnv env(grid, 500);
  int checked = 0;
  for (int i = 0; i < grid.cells(); ++i)
    for (int j = 0; j < grid.cells(); ++j) {
      const Position robot = grid.at(i);
      const Position cat = grid.at(j);
      if (std::abs(robot.row - cat.row) + std::abs(robot.col - cat.col) != 1) continue;
      const CoexistenceState s{robot, cat, 0, true, false};
      const auto own = env.observe(s);
      const auto swapped = env.observe_empathic(s);
      PerceptiveField mirrored{};
      for (int k = 0; k < 25; ++k) mirrored[static_cast<std::size_t>(24 - k)] = own[static_cast<std::size_t>(k)];
      EXPECT_EQ(swapped, mirrored);
      ++checked;
    }
  EXPECT_EQ(checked, 2 * (2 * 6 * 5));  // ordered adjacent pairs on a 6x6 grid
}

TEST(RandomWalk, UniformOverActions) {
  Rng rng(123);
  std::vector<int> counts(kNumActions, 0);
  const int draws = 100'000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(to_index(random_walk(rng)))];
  const double sigma = std::sqrt(draws * 0.2 * 0.8);
  for (int c : counts) EXPECT_NEAR(c, 20'000.0, 5 * sigma);
}

TEST(RandomWalk, SeededAndClosed) {
  Rng a(9), b(9);
  for (int i = 0; i < 1000; ++i) {
    const Action x = random_walk(a);
    EXPECT_EQ(x, random_walk(b));
    EXPECT_NE(std::find(kAllActions.begin(), kAllActions.end(), x), kAllActions.end());
  }
}

TEST(PlaceTwo, DistinctCells) {
  Rng rng(4);
  const GridSpec grid(2, 1);
  for (int i = 0; i < 100; ++i) {
    const auto [a, b] = place_two(grid, rng);
    EXPECT_NE(a, b);
    EXPECT_TRUE(grid.contains(a));
    EXPECT_TRUE(grid.contains(b));
  }
  EXPECT_THROW(place_two(GridSpec(1, 1), rng), std::invalid_argument);
}

}  // namespace
}  // namespace empathic
