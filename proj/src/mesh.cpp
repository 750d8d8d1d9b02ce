#include "meshattn/mesh.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace meshattn {

Mesh Mesh::build(Points3d vertices, Faces faces) {
  const Index n = static_cast<Index>(vertices.rows());
  if (n < 3) throw DegenerateMesh("mesh needs at least 3 vertices");
  if (faces.rows() == 0) throw DegenerateMesh("mesh has no faces");
  if (!vertices.allFinite())
    throw ParseError("non-finite vertex coordinate");
  for (Index f = 0; f < faces.rows(); ++f) {
    const Index a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
    if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n)
      throw ParseError("face " + std::to_string(f) +
                       " references a vertex out of range");
    if (a == b || b == c || a == c)
      throw DegenerateMesh("face " + std::to_string(f) +
                           " repeats a vertex index");
  }

  Mesh mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.faces_ = std::move(faces);

  // Area-weighted normals: the unnormalised cross product has length
  // 2 * area, so plain accumulation weights by area.
  mesh.normals_ = Points3d::Zero(n, 3);
  for (Index f = 0; f < mesh.faces_.rows(); ++f) {
    const Vec3 p0 = mesh.vertex(mesh.faces_(f, 0));
    const Vec3 p1 = mesh.vertex(mesh.faces_(f, 1));
    const Vec3 p2 = mesh.vertex(mesh.faces_(f, 2));
    const Vec3 fn = (p1 - p0).cross(p2 - p0);
    for (int c = 0; c < 3; ++c) mesh.normals_.row(mesh.faces_(f, c)) += fn;
  }
  for (Index i = 0; i < n; ++i) {
    const double len = mesh.normals_.row(i).norm();
    if (len > 0.0) {
      mesh.normals_.row(i) /= len;
    } else {
      mesh.normals_.row(i) << 0.0, 0.0, 1.0;  // isolated or zero-area fan
    }
  }

  mesh.adjacency_.assign(static_cast<std::size_t>(n), {});
  std::map<std::pair<Index, Index>, int> edge_faces;
  for (Index f = 0; f < mesh.faces_.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const Index a = mesh.faces_(f, c), b = mesh.faces_(f, (c + 1) % 3);
      mesh.adjacency_[static_cast<std::size_t>(a)].push_back(b);
      mesh.adjacency_[static_cast<std::size_t>(b)].push_back(a);
      ++edge_faces[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (auto& ring : mesh.adjacency_) {
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  }
  for (const auto& [edge, count] : edge_faces)
    if (count > 2) ++mesh.nonmanifold_edges_;

  mesh.bbox_min_ = mesh.vertices_.colwise().minCoeff().transpose();
  mesh.bbox_max_ = mesh.vertices_.colwise().maxCoeff().transpose();
  mesh.bbox_diagonal_ = (mesh.bbox_max_ - mesh.bbox_min_).norm();
  mesh.centroid_ = mesh.vertices_.colwise().mean().transpose();
  mesh.index_ = std::make_shared<const SpatialIndex>(mesh.vertices_);
  return mesh;
}

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".ply") return MeshFormat::PlyAscii;
  throw ParseError("unknown mesh extension '" + ext + "'");
}

namespace {

struct RawMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<Index, 3>> faces;
};

void push_polygon(RawMesh& raw, const std::vector<Index>& poly,
                  std::size_t line) {
  if (poly.size() < 3)
    throw ParseError("line " + std::to_string(line) +
                     ": face with fewer than 3 vertices");
  for (std::size_t i = 1; i + 1 < poly.size(); ++i)
    raw.faces.push_back({poly[0], poly[i], poly[i + 1]});
}

// Next non-empty, non-comment line.
bool next_line(std::istream& in, std::string& line, std::size_t& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

RawMesh read_off(std::istream& in) {
  RawMesh raw;
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw ParseError("empty OFF file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic.rfind("OFF", 0) != 0) throw ParseError("missing OFF header");
  long long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!next_line(in, line, lineno)) throw ParseError("missing OFF counts");
    header = std::istringstream(line);
    header >> nv;
  }
  if (!(header >> nf >> ne) || nv < 0 || nf < 0)
    throw ParseError("malformed OFF counts");
  for (long long i = 0; i < nv; ++i) {
    if (!next_line(in, line, lineno)) throw ParseError("truncated OFF vertices");
    std::istringstream ls(line);
    std::array<double, 3> p{};
    if (!(ls >> p[0] >> p[1] >> p[2]))
      throw ParseError("line " + std::to_string(lineno) + ": bad vertex");
    raw.vertices.push_back(p);
  }
  for (long long i = 0; i < nf; ++i) {
    if (!next_line(in, line, lineno)) throw ParseError("truncated OFF faces");
    std::istringstream ls(line);
    long long count = 0;
    if (!(ls >> count) || count < 0)
      throw ParseError("line " + std::to_string(lineno) + ": bad face");
    std::vector<Index> poly(static_cast<std::size_t>(count));
    for (auto& idx : poly)
      if (!(ls >> idx))
        throw ParseError("line " + std::to_string(lineno) + ": bad face");
    push_polygon(raw, poly, lineno);
  }
  return raw;
}

RawMesh read_obj(std::istream& in) {
  RawMesh raw;
  std::string line;
  std::size_t lineno = 0;
  while (next_line(in, line, lineno)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      std::array<double, 3> p{};
      if (!(ls >> p[0] >> p[1] >> p[2]))
        throw ParseError("line " + std::to_string(lineno) + ": bad vertex");
      raw.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<Index> poly;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long long idx = 0;
        try {
          std::size_t used = 0;
          idx = std::stoll(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          throw ParseError("line " + std::to_string(lineno) +
                           ": bad face index '" + tok + "'");
        }
        if (idx == 0)
          throw ParseError("line " + std::to_string(lineno) +
                           ": OBJ indices are 1-based");
        poly.push_back(idx > 0 ? idx - 1
                               : static_cast<Index>(raw.vertices.size()) + idx);
      }
      push_polygon(raw, poly, lineno);
    }
  }
  return raw;
}

RawMesh read_ply(std::istream& in) {
  RawMesh raw;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw ParseError("missing ply magic");
  ++lineno;

  struct Element {
    std::string name;
    long long count = 0;
    std::vector<std::string> props;
  };
  std::vector<Element> elements;
  bool ascii = false;
  while (true) {
    if (!std::getline(in, line)) throw ParseError("truncated ply header");
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (tag == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw ParseError("property before element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string t1, t2;
        ls >> t1 >> t2;
      }
      ls >> name;
      elements.back().props.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!ascii) throw ParseError("only ASCII PLY is supported");

  for (const Element& e : elements) {
    for (long long i = 0; i < e.count; ++i) {
      if (!next_line(in, line, lineno))
        throw ParseError("truncated ply body in element '" + e.name + "'");
      std::istringstream ls(line);
      if (e.name == "vertex") {
        std::array<double, 3> p{};
        std::array<bool, 3> seen{};
        for (const std::string& prop : e.props) {
          double value = 0.0;
          if (!(ls >> value))
            throw ParseError("line " + std::to_string(lineno) +
                             ": bad vertex record");
          const int axis = prop == "x" ? 0 : prop == "y" ? 1 : prop == "z" ? 2 : -1;
          if (axis >= 0) {
            p[static_cast<std::size_t>(axis)] = value;
            seen[static_cast<std::size_t>(axis)] = true;
          }
        }
        if (!(seen[0] && seen[1] && seen[2]))
          throw ParseError("ply vertex lacks x/y/z");
        raw.vertices.push_back(p);
      } else if (e.name == "face") {
        long long count = 0;
        if (!(ls >> count) || count < 0)
          throw ParseError("line " + std::to_string(lineno) + ": bad face");
        std::vector<Index> poly(static_cast<std::size_t>(count));
        for (auto& idx : poly)
          if (!(ls >> idx))
            throw ParseError("line " + std::to_string(lineno) + ": bad face");
        push_polygon(raw, poly, lineno);
      }
    }
  }
  return raw;
}

Mesh from_raw(const RawMesh& raw) {
  Points3d v(static_cast<Index>(raw.vertices.size()), 3);
  for (std::size_t i = 0; i < raw.vertices.size(); ++i)
    for (int c = 0; c < 3; ++c)
      v(static_cast<Index>(i), c) = raw.vertices[i][static_cast<std::size_t>(c)];
  Faces f(static_cast<Index>(raw.faces.size()), 3);
  for (std::size_t i = 0; i < raw.faces.size(); ++i)
    for (int c = 0; c < 3; ++c)
      f(static_cast<Index>(i), c) = raw.faces[i][static_cast<std::size_t>(c)];
  return Mesh::build(std::move(v), std::move(f));
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh '" + path.string() + "'");
  switch (format) {
    case MeshFormat::Off:
      return from_raw(read_off(in));
    case MeshFormat::Obj:
      return from_raw(read_obj(in));
    case MeshFormat::PlyAscii:
      return from_raw(read_ply(in));
  }
  throw ParseError("unknown mesh format");
}

Mesh load_mesh(const std::filesystem::path& path) {
  return load_mesh(path, format_from_path(path));
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path,
               MeshFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mesh '" + path.string() + "'");
  const Points3d& v = mesh.vertices();
  const Faces& f = mesh.faces();
  auto vertex_line = [&](Index i) {
    return fmt17(v(i, 0)) + " " + fmt17(v(i, 1)) + " " + fmt17(v(i, 2));
  };
  switch (format) {
    case MeshFormat::Off:
      out << "OFF\n" << v.rows() << ' ' << f.rows() << " 0\n";
      for (Index i = 0; i < v.rows(); ++i) out << vertex_line(i) << '\n';
      for (Index i = 0; i < f.rows(); ++i)
        out << "3 " << f(i, 0) << ' ' << f(i, 1) << ' ' << f(i, 2) << '\n';
      break;
    case MeshFormat::Obj:
      for (Index i = 0; i < v.rows(); ++i) out << "v " << vertex_line(i) << '\n';
      for (Index i = 0; i < f.rows(); ++i)
        out << "f " << f(i, 0) + 1 << ' ' << f(i, 1) + 1 << ' ' << f(i, 2) + 1
            << '\n';
      break;
    case MeshFormat::PlyAscii:
      out << "ply\nformat ascii 1.0\nelement vertex " << v.rows()
          << "\nproperty double x\nproperty double y\nproperty double z\n"
          << "element face " << f.rows()
          << "\nproperty list uchar int vertex_indices\nend_header\n";
      for (Index i = 0; i < v.rows(); ++i) out << vertex_line(i) << '\n';
      for (Index i = 0; i < f.rows(); ++i)
        out << "3 " << f(i, 0) << ' ' << f(i, 1) << ' ' << f(i, 2) << '\n';
      break;
  }
  if (!out) throw IoError("failed writing mesh '" + path.string() + "'");
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  save_mesh(mesh, path, format_from_path(path));
}

std::vector<Index> surface_neighbors(const Mesh& mesh, Index v, Index k) {
  if (v < 0 || v >= mesh.num_vertices())
    throw InvalidArgument("vertex index out of range");
  const Vec3 p = mesh.vertex(v);

  std::set<Index> ring;
  for (Index a : mesh.neighbors(v)) {
    ring.insert(a);
    for (Index b : mesh.neighbors(a)) ring.insert(b);
  }
  ring.erase(v);

  std::vector<std::pair<double, Index>> ranked;
  ranked.reserve(ring.size());
  for (Index c : ring) ranked.emplace_back((mesh.vertex(c) - p).squaredNorm(), c);
  std::sort(ranked.begin(), ranked.end());

  std::vector<Index> out;
  for (std::size_t i = 0; i < ranked.size() && static_cast<Index>(out.size()) < k; ++i)
    out.push_back(ranked[i].second);

  if (static_cast<Index>(out.size()) < k) {
    const bool isolated = mesh.neighbors(v).empty();
    const Index want = std::min<Index>(k + 1 + static_cast<Index>(out.size()),
                                       mesh.num_vertices());
    for (const Neighbor& nb : mesh.index().knn(p, want)) {
      if (static_cast<Index>(out.size()) >= k) break;
      if (nb.index == v ||
          std::find(out.begin(), out.end(), nb.index) != out.end())
        continue;
      out.push_back(nb.index);
    }
    if (isolated && out.empty())
      throw IsolatedVertex("vertex " + std::to_string(v) +
                           " has no neighbors");
  }
  return out;
}

}  // namespace meshattn
