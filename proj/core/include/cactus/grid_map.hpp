#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cactus {

// Grid cell; x is the column, y the row, origin at the top-left.
struct Position {
  int x = 0;
  int y = 0;

  friend constexpr auto operator<=>(const Position&, const Position&) = default;
};

// Immutable occupancy grid with an implicit 4-neighborhood edge set.
class GridMap {
 public:
  GridMap() = default;
  // `obstacles` is row-major, width * height entries, nonzero = blocked.
  GridMap(int width, int height, std::vector<std::uint8_t> obstacles);

  static GridMap empty(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int cell_count() const noexcept { return width_ * height_; }
  int free_count() const noexcept { return free_count_; }
  int obstacle_count() const noexcept { return cell_count() - free_count_; }

  bool in_bounds(Position p) const noexcept {
    return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_;
  }
  bool is_free(Position p) const noexcept { return in_bounds(p) && obstacles_[index(p)] == 0; }
  bool is_obstacle(Position p) const noexcept { return in_bounds(p) && obstacles_[index(p)] != 0; }

  int index(Position p) const noexcept { return p.y * width_ + p.x; }
  Position position(int index) const noexcept { return {index % width_, index / width_}; }

  const std::vector<std::uint8_t>& obstacles() const noexcept { return obstacles_; }
  std::vector<Position> free_cells() const;

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int free_count_ = 0;
  std::vector<std::uint8_t> obstacles_;
};

struct MapSpec {
  int size = 10;         // side length K
  double density = 0.0;  // obstacle fraction in [0, 1)
  std::uint64_t seed = 0;
};

// Places exactly round(density * K^2) obstacles uniformly without replacement.
GridMap generate_random_map(const MapSpec& spec);

constexpr int chebyshev(Position a, Position b) noexcept {
  const int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  const int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx > dy ? dx : dy;
}

constexpr int manhattan(Position a, Position b) noexcept {
  const int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  const int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx + dy;
}

// Free cardinal neighbors in N, E, S, W order. N is y - 1.
std::vector<Position> neighbors(const GridMap& map, Position v);

inline constexpr int kUnreachable = -1;

// Shortest-path lengths from `source` to every cell (kUnreachable for blocked
// or disconnected cells), indexed by GridMap::index.
std::vector<int> bfs_distances(const GridMap& map, Position source);

std::optional<int> bfs_distance(const GridMap& map, Position source, Position target);

// Number of 4-connected components of free cells.
int connected_components(const GridMap& map);

// MovingAI `.map` text. `.` and `G` are free; `@`, `O`, `T`, `W` are blocked.
GridMap parse_movingai(std::string_view text);
std::string serialize_movingai(const GridMap& map);

GridMap load_movingai(const std::filesystem::path& path);
void save_movingai(const GridMap& map, const std::filesystem::path& path);

}  // namespace cactus
