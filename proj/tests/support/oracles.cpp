#include "oracles.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cactus::testing {

std::vector<int> relaxation_distances(const GridMap& map, Position source) {
  std::vector<int> dist(map.cell_count(), kUnreachable);
  dist[map.index(source)] = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < map.height(); ++y) {
      for (int x = 0; x < map.width(); ++x) {
        const Position p{x, y};
        if (!map.is_free(p)) continue;
        const Position around[] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
        for (const Position q : around) {
          if (!map.is_free(q) || dist[map.index(q)] == kUnreachable) continue;
          const int via = dist[map.index(q)] + 1;
          int& here = dist[map.index(p)];
          if (here == kUnreachable || via < here) {
            here = via;
            changed = true;
          }
        }
      }
    }
  }
  return dist;
}

std::vector<Outcome> conflict_free_outcomes(const GridMap& map, const std::vector<Position>& from,
                                            const std::vector<Action>& actions) {
  const int n = static_cast<int>(from.size());
  std::vector<Outcome> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<Position> to = from;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      if (mask >> i & 1u) {
        if (actions[i] == Action::Wait) ok = false;  // only count real moves
        to[i] = apply(from[i], actions[i]);
        if (!map.is_free(to[i])) ok = false;
      }
    }
    if (!ok) continue;
    std::set<Position> cells(to.begin(), to.end());
    if (static_cast<int>(cells.size()) != n) continue;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = i + 1; j < n && ok; ++j) {
        if (to[i] == from[j] && to[j] == from[i]) ok = false;
      }
    }
    if (ok) out.push_back({mask, to});
  }
  return out;
}

VectorX<double> numeric_gradient(const std::function<double(const VectorX<double>&)>& f,
                                 const VectorX<double>& x, double h) {
  VectorX<double> g(x.size());
  VectorX<double> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double relative_error(const VectorX<double>& analytic, const VectorX<double>& numeric) {
  const double scale = numeric.norm();
  const double diff = (analytic - numeric).norm();
  return scale < 1e-9 ? diff : diff / scale;
}

void reference_stats(const std::vector<double>& xs, double& mean, double& stddev) {
  long double sum = 0;
  for (double x : xs) sum += x;
  const long double m = sum / xs.size();
  long double sq = 0;
  for (double x : xs) sq += (x - m) * (x - m);
  mean = static_cast<double>(m);
  stddev = xs.size() > 1 ? static_cast<double>(std::sqrt(sq / (xs.size() - 1))) : 0.0;
}

std::vector<int> rewards_from_history(const std::vector<std::vector<Position>>& history,
                                      const std::vector<Position>& goals) {
  std::vector<int> total(goals.size(), 0);
  for (std::size_t t = 1; t < history.size(); ++t) {
    for (std::size_t i = 0; i < goals.size(); ++i) {
      const bool now = history[t][i] == goals[i];
      const bool before = history[t - 1][i] == goals[i];
      if (now && !before) total[i] += 1;
      else if (!now) total[i] -= 1;
    }
  }
  return total;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace cactus::testing
