#include <cactus/error.hpp>
#include <cactus/grid_map.hpp>
#include <cactus/rng.hpp>
#include <cmath>
#include <filesystem>
#include <gtest/gtest.h>

#include "oracles.hpp"

namespace cactus {
namespace {

TEST(GenerateRandomMap, ZeroDensityHasNoObstacles) {
  const GridMap map = generate_random_map({10, 0.0, 3});
  EXPECT_EQ(map.obstacle_count(), 0);
  EXPECT_EQ(map.free_count(), 100);
}

TEST(GenerateRandomMap, ObstacleCountIsRoundedFraction) {
  EXPECT_EQ(generate_random_map({10, 0.3, 1}).obstacle_count(), 30);
  EXPECT_EQ(generate_random_map({7, 0.25, 1}).obstacle_count(), 12);  // 12.25
  EXPECT_EQ(generate_random_map({3, 0.5, 2}).obstacle_count(), 5);    // 4.5 rounds away from zero
}

TEST(GenerateRandomMap, DeterministicPerSeed) {
  EXPECT_EQ(generate_random_map({40, 0.2, 11}), generate_random_map({40, 0.2, 11}));
  EXPECT_NE(generate_random_map({40, 0.2, 11}), generate_random_map({40, 0.2, 12}));
}

TEST(GenerateRandomMap, RejectsBadSpecs) {
  EXPECT_THROW(generate_random_map({1, 0.0, 0}), InvalidSpecError);
  EXPECT_THROW(generate_random_map({10, 1.0, 0}), InvalidSpecError);
  EXPECT_THROW(generate_random_map({10, -0.1, 0}), InvalidSpecError);
  EXPECT_THROW(generate_random_map({2, 0.9, 0}), InvalidSpecError);  // 4 obstacles, 0 free
}

TEST(GenerateRandomMap, ObstaclesAreSpreadUniformly) {
  // Each cell of a 5x5 map at density 0.2 is blocked with probability 5/25.
  std::vector<int> hits(25, 0);
  constexpr int kMaps = 4000;
  for (int s = 0; s < kMaps; ++s) {
    const GridMap map = generate_random_map({5, 0.2, static_cast<std::uint64_t>(s)});
    for (int c = 0; c < 25; ++c) hits[c] += map.obstacles()[c];
  }
  const double p = 0.2, mean = kMaps * p, sd = std::sqrt(kMaps * p * (1 - p));
  for (int c = 0; c < 25; ++c) EXPECT_NEAR(hits[c], mean, 4 * sd) << "cell " << c;
}

TEST(Distances, ChebyshevAndManhattan) {
  EXPECT_EQ(chebyshev({0, 0}, {0, 0}), 0);
  EXPECT_EQ(chebyshev({0, 0}, {3, 2}), 3);
  EXPECT_EQ(chebyshev({5, 1}, {1, 5}), 4);
  EXPECT_EQ(manhattan({0, 0}, {0, 0}), 0);
  EXPECT_EQ(manhattan({0, 0}, {3, 2}), 5);
  EXPECT_EQ(manhattan({2, 2}, {2, 7}), 5);
}

TEST(Distances, ChebyshevManhattanSandwich) {
  Rng rng = derive_rng({5});
  for (int i = 0; i < 10000; ++i) {
    const Position a{uniform_index(rng, 50) - 25, uniform_index(rng, 50) - 25};
    const Position b{uniform_index(rng, 50) - 25, uniform_index(rng, 50) - 25};
    EXPECT_LE(chebyshev(a, b), manhattan(a, b));
    EXPECT_LE(manhattan(a, b), 2 * chebyshev(a, b));
  }
}

TEST(Neighbors, CountsAndOrder) {
  const GridMap map = GridMap::empty(3, 3);
  const auto center = neighbors(map, {1, 1});
  ASSERT_EQ(center.size(), 4u);
  EXPECT_EQ(center[0], (Position{1, 0}));  // N
  EXPECT_EQ(center[1], (Position{2, 1}));  // E
  EXPECT_EQ(center[2], (Position{1, 2}));  // S
  EXPECT_EQ(center[3], (Position{0, 1}));  // W
  EXPECT_EQ(neighbors(map, {0, 0}).size(), 2u);
}

TEST(Neighbors, WalledCellHasNone) {
  const GridMap map = parse_movingai("type octile\nheight 3\nwidth 3\nmap\n.@.\n@.@\n.@.\n");
  EXPECT_TRUE(neighbors(map, {1, 1}).empty());
}

TEST(Neighbors, RejectsInvalidPositions) {
  const GridMap map = parse_movingai("type octile\nheight 1\nwidth 2\nmap\n.@\n");
  EXPECT_THROW(neighbors(map, {1, 0}), InvalidPositionError);
  EXPECT_THROW(neighbors(map, {5, 0}), InvalidPositionError);
}

TEST(Bfs, BasicCases) {
  const GridMap open = GridMap::empty(10, 10);
  EXPECT_EQ(bfs_distance(open, {4, 4}, {4, 4}), 0);
  EXPECT_EQ(bfs_distance(open, {0, 0}, {9, 9}), 18);
  const GridMap split =
      parse_movingai("type octile\nheight 3\nwidth 3\nmap\n.@.\n.@.\n.@.\n");
  EXPECT_FALSE(bfs_distance(split, {0, 0}, {2, 2}).has_value());
}

TEST(Bfs, MatchesRelaxationAndIsSymmetric) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const GridMap map = generate_random_map({12, 0.3, s});
    const auto cells = map.free_cells();
    const Position src = cells[s % cells.size()];
    const std::vector<int> fast = bfs_distances(map, src);
    EXPECT_EQ(fast, testing::relaxation_distances(map, src));
    for (const Position& c : cells) EXPECT_EQ(bfs_distance(map, src, c), bfs_distance(map, c, src));
  }
}

TEST(Components, CountsIslands) {
  EXPECT_EQ(connected_components(GridMap::empty(6, 6)), 1);
  const GridMap map = parse_movingai("type octile\nheight 3\nwidth 3\nmap\n.@.\n@@@\n.@.\n");
  EXPECT_EQ(connected_components(map), 4);
}

TEST(MovingAi, GlyphMapping) {
  const GridMap map = parse_movingai("type octile\nheight 2\nwidth 2\nmap\n.@\n..\n");
  EXPECT_EQ(map.obstacle_count(), 1);
  EXPECT_TRUE(map.is_obstacle({1, 0}));
  const GridMap all = parse_movingai("type octile\nheight 1\nwidth 6\nmap\n.G@OTW\n");
  EXPECT_TRUE(all.is_free({0, 0}));
  EXPECT_TRUE(all.is_free({1, 0}));
  for (int x = 2; x < 6; ++x) EXPECT_TRUE(all.is_obstacle({x, 0}));
}

TEST(MovingAi, HeaderOrderAndLineEndings) {
  const GridMap a = parse_movingai("type octile\nwidth 3\nheight 1\nmap\n.@.\n");
  const GridMap b = parse_movingai("type octile\r\nheight 1\r\nwidth 3\r\nmap\r\n.@.\r\n\r\n");
  EXPECT_EQ(a, b);
}

TEST(MovingAi, RoundTrip) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const GridMap map = generate_random_map({static_cast<int>(2 + s), 0.3, s});
    EXPECT_EQ(parse_movingai(serialize_movingai(map)), map);
  }
}

TEST(MovingAi, CanonicalForm) {
  const std::string text = "type octile\nwidth 3\nheight 2\nmap\nGT.\n.OW\n";
  EXPECT_EQ(serialize_movingai(parse_movingai(text)),
            "type octile\nheight 2\nwidth 3\nmap\n.@.\n.@@\n");
}

int error_line(const std::string& text) {
  try {
    parse_movingai(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

TEST(MovingAi, ErrorsNameTheLine) {
  EXPECT_EQ(error_line("type octile\nheight 3\nwidth 2\nmap\n..\n..\n"), 7);  // missing row
  EXPECT_EQ(error_line("type octile\nheight 2\nwidth 2\nmap\n..\n.\n"), 6);   // short row
  EXPECT_EQ(error_line("type octile\nheight 1\nwidth 2\nmap\n.x\n"), 5);      // bad glyph
  EXPECT_EQ(error_line("kind octile\nheight 1\nwidth 1\nmap\n.\n"), 1);
  EXPECT_EQ(error_line("type octile\nheight one\nwidth 1\nmap\n.\n"), 2);
  EXPECT_EQ(error_line("type octile\nheight 1\nwidth 1\nmap\n.\n.\n"), 6);     // extra row
}

TEST(MovingAi, LoadsMissingFileAsFormatError) {
  EXPECT_THROW(load_movingai("/nonexistent/cactus.map"), FormatError);
}

TEST(MovingAi, SaveThenLoad) {
  const auto path = std::filesystem::temp_directory_path() / "cactus_grid_roundtrip.map";
  const GridMap map = generate_random_map({9, 0.2, 4});
  save_movingai(map, path);
  EXPECT_EQ(load_movingai(path), map);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace cactus
