#pragma once

// Independent reference implementations used only by tests.

#include "selbias/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

namespace oracle {

/// Enumerates every simple path between a and b in the skeleton and applies
/// the textbook blocking rules to each.
inline bool d_separated_by_paths(const selbias::Dag& g, const std::string& a, const std::string& b,
                                 const std::set<std::string>& z) {
  const auto desc_in_z = [&](const std::string& n) {
    for (const auto& d : g.descendants({n})) {
      if (z.count(d)) return true;
    }
    return false;
  };
  std::vector<std::string> path{a};
  std::set<std::string> on_path{a};
  bool active = false;
  std::function<void(const std::string&)> walk = [&](const std::string& cur) {
    if (active) return;
    if (cur == b) {
      bool open = true;
      for (std::size_t i = 1; i + 1 < path.size() && open; ++i) {
        const bool into_from_left = g.has_edge(path[i - 1], path[i]);
        const bool into_from_right = g.has_edge(path[i + 1], path[i]);
        if (into_from_left && into_from_right) {
          open = desc_in_z(path[i]);
        } else {
          open = !z.count(path[i]);
        }
      }
      active = open;
      return;
    }
    std::set<std::string> nbrs = g.parents(cur);
    for (const auto& c : g.children(cur)) nbrs.insert(c);
    for (const auto& n : nbrs) {
      if (on_path.count(n)) continue;
      path.push_back(n);
      on_path.insert(n);
      walk(n);
      on_path.erase(n);
      path.pop_back();
    }
  };
  walk(a);
  return !active;
}

/// Isotonic regression by exhaustive block search: the fitted value at i is
/// max over l <= i of min over r >= i of the weighted mean of y[l..r].
inline std::vector<double> isotonic_minmax(const std::vector<double>& y, const std::vector<double>& w) {
  const std::size_t n = y.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l <= i; ++l) {
      double inner = std::numeric_limits<double>::infinity();
      for (std::size_t r = i; r < n; ++r) {
        double sw = 0, sy = 0;
        for (std::size_t k = l; k <= r; ++k) {
          sw += w[k];
          sy += w[k] * y[k];
        }
        inner = std::min(inner, sy / sw);
      }
      best = std::max(best, inner);
    }
    out[i] = best;
  }
  return out;
}

/// Composite Simpson with a fixed even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace oracle
