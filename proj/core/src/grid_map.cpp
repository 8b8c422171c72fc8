#include "cactus/grid_map.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

#include "cactus/error.hpp"
#include "cactus/rng.hpp"

namespace cactus {

GridMap::GridMap(int width, int height, std::vector<std::uint8_t> obstacles)
    : width_(width), height_(height), obstacles_(std::move(obstacles)) {
  if (width < 1 || height < 1) {
    throw InvalidSpecError("map dimensions must be positive");
  }
  if (obstacles_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidSpecError("obstacle grid size does not match map dimensions");
  }
  for (auto& cell : obstacles_) cell = cell ? 1 : 0;
  free_count_ = static_cast<int>(std::count(obstacles_.begin(), obstacles_.end(), 0));
}

GridMap GridMap::empty(int width, int height) {
  return GridMap(width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0));
}

std::vector<Position> GridMap::free_cells() const {
  std::vector<Position> cells;
  cells.reserve(free_count_);
  for (int i = 0; i < cell_count(); ++i) {
    if (obstacles_[i] == 0) cells.push_back(position(i));
  }
  return cells;
}

GridMap generate_random_map(const MapSpec& spec) {
  if (spec.size < 2) throw InvalidSpecError("map size must be at least 2");
  if (!(spec.density >= 0.0 && spec.density < 1.0)) {
    throw InvalidSpecError("obstacle density must lie in [0, 1)");
  }
  const int cells = spec.size * spec.size;
  const int blocked = static_cast<int>(std::lround(spec.density * cells));
  if (cells - blocked < 2) {
    throw InvalidSpecError("density leaves fewer than 2 free cells");
  }

  // Partial Fisher-Yates: the first `blocked` slots become obstacles.
  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_rng({spec.seed, 0x6d6170ull});
  for (int i = 0; i < blocked; ++i) {
    const int j = i + uniform_index(rng, cells - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::uint8_t> obstacles(cells, 0);
  for (int i = 0; i < blocked; ++i) obstacles[order[i]] = 1;
  return GridMap(spec.size, spec.size, std::move(obstacles));
}

namespace {

constexpr Position kCardinal[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};

}  // namespace

std::vector<Position> neighbors(const GridMap& map, Position v) {
  if (!map.is_free(v)) {
    throw InvalidPositionError("position (" + std::to_string(v.x) + "," + std::to_string(v.y) +
                               ") is outside the map or blocked");
  }
  std::vector<Position> out;
  out.reserve(4);
  for (Position d : kCardinal) {
    const Position n{v.x + d.x, v.y + d.y};
    if (map.is_free(n)) out.push_back(n);
  }
  return out;
}

std::vector<int> bfs_distances(const GridMap& map, Position source) {
  std::vector<int> dist(map.cell_count(), kUnreachable);
  if (!map.is_free(source)) return dist;
  std::vector<int> frontier;
  frontier.reserve(map.free_count());
  frontier.push_back(map.index(source));
  dist[frontier.front()] = 0;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const Position p = map.position(frontier[head]);
    const int next = dist[frontier[head]] + 1;
    for (Position d : kCardinal) {
      const Position n{p.x + d.x, p.y + d.y};
      if (!map.is_free(n)) continue;
      const int idx = map.index(n);
      if (dist[idx] != kUnreachable) continue;
      dist[idx] = next;
      frontier.push_back(idx);
    }
  }
  return dist;
}

std::optional<int> bfs_distance(const GridMap& map, Position source, Position target) {
  if (!map.is_free(source) || !map.is_free(target)) return std::nullopt;
  const int d = bfs_distances(map, source)[map.index(target)];
  if (d == kUnreachable) return std::nullopt;
  return d;
}

int connected_components(const GridMap& map) {
  std::vector<int> label(map.cell_count(), -1);
  int components = 0;
  for (int i = 0; i < map.cell_count(); ++i) {
    if (map.obstacles()[i] != 0 || label[i] >= 0) continue;
    std::queue<int> queue;
    queue.push(i);
    label[i] = components;
    while (!queue.empty()) {
      const Position p = map.position(queue.front());
      queue.pop();
      for (Position d : kCardinal) {
        const Position n{p.x + d.x, p.y + d.y};
        if (!map.is_free(n) || label[map.index(n)] >= 0) continue;
        label[map.index(n)] = components;
        queue.push(map.index(n));
      }
    }
    ++components;
  }
  return components;
}

namespace {

// Splits on '\n', dropping one trailing '\r' per line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Parses "<key> <positive int>".
std::optional<int> header_value(std::string_view line, std::string_view key) {
  line = trim(line);
  if (line.size() <= key.size() || line.substr(0, key.size()) != key) return std::nullopt;
  if (line[key.size()] != ' ' && line[key.size()] != '\t') return std::nullopt;
  const std::string_view rest = trim(line.substr(key.size()));
  int value = 0;
  const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
  if (ec != std::errc{} || ptr != rest.data() + rest.size() || value < 1) return std::nullopt;
  return value;
}

}  // namespace

GridMap parse_movingai(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]).substr(0, 5) != "type ") {
    throw ParseError(1, "expected 'type <name>' header");
  }
  std::optional<int> height;
  std::optional<int> width;
  std::size_t line = 1;
  for (; line < 3; ++line) {
    if (line >= lines.size()) throw ParseError(static_cast<int>(line) + 1, "truncated header");
    if (auto h = header_value(lines[line], "height"); h && !height) {
      height = h;
    } else if (auto w = header_value(lines[line], "width"); w && !width) {
      width = w;
    } else {
      throw ParseError(static_cast<int>(line) + 1, "expected 'height <H>' or 'width <W>'");
    }
  }
  if (line >= lines.size() || trim(lines[line]) != "map") {
    throw ParseError(static_cast<int>(line) + 1, "expected 'map'");
  }
  ++line;

  const std::size_t rows_available = lines.size() - line;
  if (rows_available != static_cast<std::size_t>(*height)) {
    const int at = rows_available < static_cast<std::size_t>(*height)
                       ? static_cast<int>(lines.size()) + 1
                       : static_cast<int>(line) + *height + 1;
    throw ParseError(at, "expected " + std::to_string(*height) + " map rows, found " +
                             std::to_string(rows_available));
  }

  std::vector<std::uint8_t> obstacles;
  obstacles.reserve(static_cast<std::size_t>(*width) * *height);
  for (int y = 0; y < *height; ++y, ++line) {
    const std::string_view row = lines[line];
    const int line_no = static_cast<int>(line) + 1;
    if (row.size() != static_cast<std::size_t>(*width)) {
      throw ParseError(line_no, "row has " + std::to_string(row.size()) + " cells, expected " +
                                    std::to_string(*width));
    }
    for (char glyph : row) {
      switch (glyph) {
        case '.':
        case 'G':
          obstacles.push_back(0);
          break;
        case '@':
        case 'O':
        case 'T':
        case 'W':
          obstacles.push_back(1);
          break;
        default:
          throw ParseError(line_no, std::string("unknown glyph '") + glyph + "'");
      }
    }
  }
  return GridMap(*width, *height, std::move(obstacles));
}

std::string serialize_movingai(const GridMap& map) {
  std::string out = "type octile\nheight " + std::to_string(map.height()) + "\nwidth " +
                    std::to_string(map.width()) + "\nmap\n";
  out.reserve(out.size() + static_cast<std::size_t>(map.cell_count() + map.height()));
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) out.push_back(map.is_obstacle({x, y}) ? '@' : '.');
    out.push_back('\n');
  }
  return out;
}

GridMap load_movingai(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open map file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_movingai(buffer.str());
}

void save_movingai(const GridMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write map file " + path.string());
  out << serialize_movingai(map);
  if (!out) throw FormatError("failed writing map file " + path.string());
}

}  // namespace cactus
