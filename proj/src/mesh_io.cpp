#include "meshgrad/mesh_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace meshgrad {

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw MeshError("OBJ line " + std::to_string(line) + ": " + what);
}

}  // namespace

Mesh read_obj(std::istream& in) {
  std::vector<Eigen::Vector3d> positions;
  std::vector<std::array<Index, 3>> faces;
  std::vector<std::size_t> face_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ss >> p.x() >> p.y() >> p.z())) parse_error(line_no, "malformed vertex record");
      positions.push_back(p);
    } else if (tag == "f") {
      std::vector<Index> ids;
      std::string token;
      while (ss >> token) {
        const std::string head = token.substr(0, token.find('/'));
        long value = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
        if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) {
          parse_error(line_no, "malformed face index '" + token + "'");
        }
        // Relative indices resolve against the vertices read so far.
        const long resolved = value > 0 ? value - 1 : static_cast<long>(positions.size()) + value;
        ids.push_back(static_cast<Index>(resolved));
      }
      if (ids.size() != 3) {
        parse_error(line_no, "face has " + std::to_string(ids.size()) +
                                 " vertices; only triangles are supported");
      }
      faces.push_back({ids[0], ids[1], ids[2]});
      face_lines.push_back(line_no);
    }
  }
  if (faces.empty()) throw MeshError("OBJ contains no faces");
  const auto nv = static_cast<long>(positions.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (Index v : faces[f]) {
      if (v < 0 || v >= nv) {
        parse_error(face_lines[f], "vertex index " + std::to_string(v + 1) +
                                       " out of range (" + std::to_string(nv) + " vertices)");
      }
    }
  }
  return Mesh(std::move(positions), std::move(faces));
}

Mesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  return read_obj(in);
}

void write_obj(std::ostream& out, std::span<const Eigen::Vector3d> positions,
               const std::vector<std::array<Index, 3>>& faces) {
  out << std::setprecision(6);
  for (const auto& p : positions) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const auto& f : faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void save_obj(const std::string& path, std::span<const Eigen::Vector3d> positions,
              const std::vector<std::array<Index, 3>>& faces) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file: " + path);
  write_obj(out, positions, faces);
}

}  // namespace meshgrad
