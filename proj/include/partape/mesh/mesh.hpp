// Copyright 2026 The partape Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "partape/errors.hpp"

namespace partape::mesh {

using Index = std::int32_t;
using Point = std::array<double, 2>;
using Edge = std::array<Index, 2>;

// Edge of a triangle taken in counter-clockwise order, linked to the mesh
// edge it lies on. sign is +1 if the mesh edge runs i -> j, -1 otherwise.
struct TriangleSide {
  Index edge;
  int sign;
};

// Boundary edge with endpoints in counter-clockwise order of its triangle, so
// that the outward normal is the right-hand perpendicular of (j - i).
struct BoundaryFace {
  Index edge;
  Index i;
  Index j;
  int marker;
};

// 2D unstructured mesh: points, edges and named point markers. Triangles and
// boundary faces are derived from the edge graph by finalize().
class Mesh {
 public:
  std::vector<Point> points;
  std::vector<Edge> edges;
  std::map<std::string, std::vector<Index>> markers;

  std::size_t num_points() const { return points.size(); }
  std::size_t num_edges() const { return edges.size(); }

  const std::vector<std::array<Index, 3>>& triangles() const { return triangles_; }
  const std::vector<std::array<TriangleSide, 3>>& triangle_sides() const { return sides_; }
  const std::vector<BoundaryFace>& boundary_faces() const { return faces_; }
  const std::vector<std::string>& marker_names() const { return marker_names_; }

  int marker_id(const std::string& name) const {
    const auto it = std::find(marker_names_.begin(), marker_names_.end(), name);
    if (it == marker_names_.end()) throw ConfigError("mesh has no marker '" + name + "'");
    return static_cast<int>(it - marker_names_.begin());
  }

  // Checks the invariants and throws StructuralError naming the first
  // offending entity.
  void validate() const {
    const auto n = static_cast<Index>(points.size());
    std::vector<char> used(points.size(), 0);
    std::vector<std::pair<Index, Index>> keys;
    keys.reserve(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [a, b] = edges[e];
      if (a < 0 || b < 0 || a >= n || b >= n) {
        throw StructuralError("edge " + std::to_string(e) + " references a point out of range");
      }
      if (a == b) {
        throw StructuralError("edge " + std::to_string(e) + " has identical endpoints (" +
                              std::to_string(a) + ", " + std::to_string(b) + ")");
      }
      used[static_cast<std::size_t>(a)] = used[static_cast<std::size_t>(b)] = 1;
      keys.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(keys.begin(), keys.end());
    const auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) {
      throw StructuralError("duplicate edge between points " + std::to_string(dup->first) +
                            " and " + std::to_string(dup->second));
    }
    for (std::size_t p = 0; p < used.size(); ++p) {
      if (used[p] == 0) throw StructuralError("point " + std::to_string(p) + " has no edge");
      if (!std::isfinite(points[p][0]) || !std::isfinite(points[p][1])) {
        throw StructuralError("point " + std::to_string(p) + " has non-finite coordinates");
      }
    }
    for (const auto& [name, list] : markers) {
      for (Index p : list) {
        if (p < 0 || p >= n) {
          throw StructuralError("marker '" + name + "' references point " + std::to_string(p) +
                                " out of range");
        }
      }
    }
  }

  // Validates and derives triangles (3-cliques of the edge graph, oriented
  // counter-clockwise) and boundary faces (edges with one triangle).
  void finalize() {
    validate();
    const std::size_t n = points.size();
    std::vector<std::vector<std::pair<Index, Index>>> adj(n);  // (neighbor, edge)
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [a, b] = edges[e];
      adj[static_cast<std::size_t>(a)].emplace_back(b, static_cast<Index>(e));
      adj[static_cast<std::size_t>(b)].emplace_back(a, static_cast<Index>(e));
    }
    for (auto& l : adj) std::sort(l.begin(), l.end());
    auto edge_between = [&](Index a, Index b) -> Index {
      const auto& l = adj[static_cast<std::size_t>(a)];
      const auto it = std::lower_bound(l.begin(), l.end(), std::make_pair(b, Index{-1}));
      return (it != l.end() && it->first == b) ? it->second : -1;
    };

    triangles_.clear();
    sides_.clear();
    faces_.clear();
    std::vector<int> edge_triangles(edges.size(), 0);
    std::vector<std::array<Index, 3>> owner(edges.size());
    for (Index a = 0; a < static_cast<Index>(n); ++a) {
      for (const auto& [b, eab] : adj[static_cast<std::size_t>(a)]) {
        if (b <= a) continue;
        for (const auto& [c, ebc] : adj[static_cast<std::size_t>(b)]) {
          if (c <= b || edge_between(a, c) < 0) continue;
          std::array<Index, 3> t{a, b, c};
          if (signed_area(t) < 0) std::swap(t[1], t[2]);
          if (signed_area(t) == 0.0) {
            throw StructuralError("triangle " + std::to_string(triangles_.size()) + " (" +
                                  std::to_string(t[0]) + ", " + std::to_string(t[1]) + ", " +
                                  std::to_string(t[2]) + ") is degenerate");
          }
          std::array<TriangleSide, 3> s{};
          for (int k = 0; k < 3; ++k) {
            const Index i = t[static_cast<std::size_t>(k)];
            const Index j = t[static_cast<std::size_t>((k + 1) % 3)];
            const Index e = edge_between(i, j);
            s[static_cast<std::size_t>(k)] = {e, edges[static_cast<std::size_t>(e)][0] == i ? 1 : -1};
            ++edge_triangles[static_cast<std::size_t>(e)];
            owner[static_cast<std::size_t>(e)] = {i, j, 0};
          }
          triangles_.push_back(t);
          sides_.push_back(s);
        }
      }
    }

    marker_names_.clear();
    std::vector<std::vector<char>> in_marker;
    for (const auto& [name, list] : markers) {
      marker_names_.push_back(name);
      std::vector<char> flag(n, 0);
      for (Index p : list) flag[static_cast<std::size_t>(p)] = 1;
      in_marker.push_back(std::move(flag));
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edge_triangles[e] > 2) {
        throw StructuralError("edge " + std::to_string(e) + " is shared by more than two triangles");
      }
      if (edge_triangles[e] != 1) continue;
      const Index i = owner[e][0], j = owner[e][1];
      int marker = -1;
      for (std::size_t m = 0; m < in_marker.size(); ++m) {
        if (in_marker[m][static_cast<std::size_t>(i)] && in_marker[m][static_cast<std::size_t>(j)]) {
          marker = static_cast<int>(m);
          break;
        }
      }
      faces_.push_back({static_cast<Index>(e), i, j, marker});
    }
  }

  double signed_area(const std::array<Index, 3>& t) const {
    const Point& p0 = points[static_cast<std::size_t>(t[0])];
    const Point& p1 = points[static_cast<std::size_t>(t[1])];
    const Point& p2 = points[static_cast<std::size_t>(t[2])];
    return 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
  }

  friend bool operator==(const Mesh& a, const Mesh& b) {
    return a.points == b.points && a.edges == b.edges && a.markers == b.markers;
  }

 private:
  std::vector<std::array<Index, 3>> triangles_;
  std::vector<std::array<TriangleSide, 3>> sides_;
  std::vector<BoundaryFace> faces_;
  std::vector<std::string> marker_names_;
};

// Structured triangulation of [0, lx] x [0, ly] with nx x ny cells, each cell
// split along its (i, j) -> (i+1, j+1) diagonal. Edges are ordered point by
// point (right, up, diagonal) so that contiguous edge runs are spatially
// local. Markers: left, right, bottom, top.
inline Mesh generate_grid(int nx, int ny, double lx, double ly) {
  if (nx < 2 || ny < 2) throw ContractViolation("generate_grid needs nx, ny >= 2");
  if (!(lx > 0.0) || !(ly > 0.0)) throw ContractViolation("generate_grid needs positive lengths");
  Mesh m;
  auto id = [nx](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.points.push_back({lx * i / nx, ly * j / ny});
    }
  }
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      if (i < nx) m.edges.push_back({id(i, j), id(i + 1, j)});
      if (j < ny) m.edges.push_back({id(i, j), id(i, j + 1)});
      if (i < nx && j < ny) m.edges.push_back({id(i, j), id(i + 1, j + 1)});
    }
  }
  auto& left = m.markers["left"];
  auto& right = m.markers["right"];
  auto& bottom = m.markers["bottom"];
  auto& top = m.markers["top"];
  for (int j = 0; j <= ny; ++j) {
    left.push_back(id(0, j));
    right.push_back(id(nx, j));
  }
  for (int i = 0; i <= nx; ++i) {
    bottom.push_back(id(i, 0));
    top.push_back(id(i, ny));
  }
  m.finalize();
  return m;
}

// Text format, line oriented ('#' starts a comment):
//   points N      followed by N lines "x y"
//   edges M       followed by M lines "a b"
//   marker NAME K followed by K lines with one point index each
inline void write_mesh(std::ostream& os, const Mesh& m) {
  os << std::setprecision(17);
  os << "points " << m.points.size() << '\n';
  for (const auto& p : m.points) os << p[0] << ' ' << p[1] << '\n';
  os << "edges " << m.edges.size() << '\n';
  for (const auto& e : m.edges) os << e[0] << ' ' << e[1] << '\n';
  for (const auto& [name, list] : m.markers) {
    os << "marker " << name << ' ' << list.size() << '\n';
    for (Index p : list) os << p << '\n';
  }
}

inline void save_mesh(const std::string& path, const Mesh& m) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_mesh(os, m);
  if (!os) throw Error("error writing '" + path + "'");
}

inline Mesh read_mesh(std::istream& is) {
  Mesh m;
  std::string line;
  int line_no = 0;
  auto next = [&](std::istringstream& ss) -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ss = std::istringstream(line);
      return true;
    }
    return false;
  };
  auto expect_end = [&](std::istringstream& ss) {
    std::string rest;
    if (ss >> rest) throw ParseError("unexpected token '" + rest + "'", line_no);
  };
  auto read_count = [&](std::istringstream& ss, const char* what) {
    long long n = -1;
    if (!(ss >> n) || n < 0) throw ParseError(std::string("bad ") + what + " count", line_no);
    return static_cast<std::size_t>(n);
  };
  std::istringstream ss;
  bool have_points = false, have_edges = false;
  while (next(ss)) {
    std::string key;
    ss >> key;
    if (key == "points") {
      if (have_points) throw ParseError("duplicate points section", line_no);
      have_points = true;
      const std::size_t n = read_count(ss, "point");
      expect_end(ss);
      m.points.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        if (!next(ss)) throw ParseError("unexpected end of file in points section", line_no);
        Point p{};
        if (!(ss >> p[0] >> p[1])) throw ParseError("expected 'x y'", line_no);
        expect_end(ss);
        m.points.push_back(p);
      }
    } else if (key == "edges") {
      if (have_edges) throw ParseError("duplicate edges section", line_no);
      have_edges = true;
      const std::size_t n = read_count(ss, "edge");
      expect_end(ss);
      m.edges.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        if (!next(ss)) throw ParseError("unexpected end of file in edges section", line_no);
        long long a = 0, b = 0;
        if (!(ss >> a >> b)) throw ParseError("expected 'a b'", line_no);
        expect_end(ss);
        if (a < 0 || b < 0 || a > std::numeric_limits<Index>::max() ||
            b > std::numeric_limits<Index>::max()) {
          throw ParseError("edge endpoint out of range", line_no);
        }
        m.edges.push_back({static_cast<Index>(a), static_cast<Index>(b)});
      }
    } else if (key == "marker") {
      std::string name;
      if (!(ss >> name)) throw ParseError("marker without name", line_no);
      if (m.markers.count(name) != 0) throw ParseError("duplicate marker '" + name + "'", line_no);
      const std::size_t n = read_count(ss, "marker");
      expect_end(ss);
      auto& list = m.markers[name];
      for (std::size_t k = 0; k < n; ++k) {
        if (!next(ss)) throw ParseError("unexpected end of file in marker section", line_no);
        long long p = -1;
        if (!(ss >> p) || p < 0 || p > std::numeric_limits<Index>::max()) {
          throw ParseError("expected a point index", line_no);
        }
        expect_end(ss);
        list.push_back(static_cast<Index>(p));
      }
    } else {
      throw ParseError("unknown section '" + key + "'", line_no);
    }
  }
  if (!have_points || !have_edges) throw ParseError("missing points or edges section", line_no);
  m.finalize();
  return m;
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open mesh file '" + path + "'");
  return read_mesh(is);
}

}  // namespace partape::mesh
