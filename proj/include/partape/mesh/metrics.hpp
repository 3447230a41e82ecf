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

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "partape/errors.hpp"
#include "partape/mesh/mesh.hpp"

namespace partape::mesh {

// Median-dual metrics. T is double for passive runs or the active scalar type
// when coordinates are differentiated.
template <class T>
struct DualMetrics {
  std::vector<T> volume;                     // per point
  std::vector<std::array<T, 2>> normal;      // per edge, oriented from edges[e][0] to edges[e][1]
  std::vector<std::array<T, 2>> face_normal; // per boundary face, outward, full edge length
  std::vector<T> face_length;                // per boundary face
};

template <class T>
using Coordinates = std::vector<std::array<T, 2>>;

template <class T>
Coordinates<T> coordinates_of(const Mesh& m) {
  Coordinates<T> c(m.num_points());
  for (std::size_t p = 0; p < c.size(); ++p) c[p] = {T(m.points[p][0]), T(m.points[p][1])};
  return c;
}

// Each triangle gives a third of its area to each vertex and contributes to
// each of its edges the dual face running from the edge midpoint to the
// triangle centroid.
template <class T>
DualMetrics<T> compute_metrics(const Mesh& m, const Coordinates<T>& x) {
  if (x.size() != m.num_points()) throw ContractViolation("coordinate count does not match mesh");
  DualMetrics<T> out;
  out.volume.assign(m.num_points(), T(0.0));
  out.normal.assign(m.num_edges(), {T(0.0), T(0.0)});
  const auto& tris = m.triangles();
  const auto& sides = m.triangle_sides();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& p0 = x[static_cast<std::size_t>(tris[t][0])];
    const auto& p1 = x[static_cast<std::size_t>(tris[t][1])];
    const auto& p2 = x[static_cast<std::size_t>(tris[t][2])];
    const T area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
    if (!(area > 0.0)) {
      throw StructuralError("triangle " + std::to_string(t) + " is degenerate or inverted");
    }
    const T third = area / 3.0;
    for (int k = 0; k < 3; ++k) out.volume[static_cast<std::size_t>(tris[t][static_cast<std::size_t>(k)])] += third;
    const T cx = (p0[0] + p1[0] + p2[0]) / 3.0;
    const T cy = (p0[1] + p1[1] + p2[1]) / 3.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& pi = x[static_cast<std::size_t>(tris[t][k])];
      const auto& pj = x[static_cast<std::size_t>(tris[t][(k + 1) % 3])];
      const T dx = cx - 0.5 * (pi[0] + pj[0]);
      const T dy = cy - 0.5 * (pi[1] + pj[1]);
      auto& n = out.normal[static_cast<std::size_t>(sides[t][k].edge)];
      if (sides[t][k].sign > 0) {
        n[0] += dy;
        n[1] -= dx;
      } else {
        n[0] -= dy;
        n[1] += dx;
      }
    }
  }
  const auto& faces = m.boundary_faces();
  out.face_normal.reserve(faces.size());
  out.face_length.reserve(faces.size());
  for (const auto& f : faces) {
    const auto& pi = x[static_cast<std::size_t>(f.i)];
    const auto& pj = x[static_cast<std::size_t>(f.j)];
    const T tx = pj[0] - pi[0];
    const T ty = pj[1] - pi[1];
    out.face_normal.push_back({ty, -tx});
    using std::sqrt;
    out.face_length.push_back(sqrt(tx * tx + ty * ty));
  }
  return out;
}

}  // namespace partape::mesh
