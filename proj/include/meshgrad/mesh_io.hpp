#pragma once

#include "meshgrad/mesh.hpp"

#include <iosfwd>
#include <span>
#include <string>

namespace meshgrad {

/// Reads `v` and triangular `f` records; `/vt/vn` suffixes and all other
/// record types are skipped. Indices are 1-based (negative indices count back
/// from the last vertex, as in the OBJ format).
Mesh read_obj(std::istream& in);
Mesh load_obj(const std::string& path);

/// Writes vertices then faces with 6 significant digits.
void write_obj(std::ostream& out, std::span<const Eigen::Vector3d> positions,
               const std::vector<std::array<Index, 3>>& faces);
void save_obj(const std::string& path, std::span<const Eigen::Vector3d> positions,
              const std::vector<std::array<Index, 3>>& faces);
inline void save_obj(const std::string& path, const Mesh& mesh) {
  save_obj(path, mesh.positions(), mesh.faces());
}

}  // namespace meshgrad
