#include "meshattn/scanpath.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace meshattn {

MultiMatchScore multimatch(const Scanpath& a, const Scanpath& b, double diag) {
  if (a.size() < 2 || b.size() < 2)
    throw TooShort("MultiMatch needs at least two fixations per scanpath");
  if (!(diag > 0.0)) throw InvalidArgument("diagonal must be positive");

  auto saccades = [](const Scanpath& s) {
    std::vector<Vec3> out;
    for (std::size_t i = 0; i + 1 < s.fixations.size(); ++i)
      out.push_back(s.fixations[i + 1].position - s.fixations[i].position);
    return out;
  };
  const std::vector<Vec3> u = saccades(a), v = saccades(b);
  const std::size_t n = u.size(), m = v.size();

  Eigen::MatrixXd cost(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cost(i, j) = (u[i] - v[j]).norm();

  // Accumulated cost of the cheapest monotone path reaching (i, j).
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Constant(n, m, inf);
  acc(0, 0) = cost(0, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == 0 && j == 0) continue;
      double best = inf;
      if (i > 0 && j > 0) best = std::min(best, acc(i - 1, j - 1));
      if (i > 0) best = std::min(best, acc(i - 1, j));
      if (j > 0) best = std::min(best, acc(i, j - 1));
      acc(i, j) = best + cost(i, j);
    }
  }

  // Backtrack; the diagonal wins ties, then the move that keeps the path
  // closer to the matrix diagonal.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t i = n - 1, j = m - 1;
  pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double d = acc(i - 1, j - 1), up = acc(i - 1, j),
                   left = acc(i, j - 1);
      if (d <= up && d <= left) {
        --i;
        --j;
      } else if (up < left) {
        --i;
      } else if (left < up) {
        --j;
      } else if (i * m >= j * n) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    pairs.emplace_back(i, j);
  }

  MultiMatchScore s;
  double shape = 0, direction = 0, length = 0, position = 0, duration = 0;
  for (const auto& [ia, ib] : pairs) {
    const Vec3& x = u[ia];
    const Vec3& y = v[ib];
    shape += (x - y).norm() / (2.0 * diag);
    const double nx = x.norm(), ny = y.norm();
    // atan2 keeps identical saccades at exactly zero angle.
    if (nx > 0.0 && ny > 0.0) direction += std::atan2(x.cross(y).norm(), x.dot(y)) / M_PI;
    length += std::abs(nx - ny) / diag;
    const Fixation& fa = a.fixations[ia];
    const Fixation& fb = b.fixations[ib];
    position += (fa.position - fb.position).norm() / diag;
    const double dmax = std::max(fa.duration, fb.duration);
    if (dmax > 0.0) duration += std::abs(fa.duration - fb.duration) / dmax;
  }
  const double k = double(pairs.size());
  auto score = [k](double total) { return std::clamp(1.0 - total / k, 0.0, 1.0); };
  s.shape = score(shape);
  s.direction = score(direction);
  s.length = score(length);
  s.position = score(position);
  s.duration = score(duration);
  return s;
}

std::string scanpath_to_json(const Scanpath& path) {
  nlohmann::ordered_json j;
  j["mesh"] = path.mesh;
  j["fixations"] = nlohmann::ordered_json::array();
  for (const Fixation& f : path.fixations) {
    nlohmann::ordered_json e;
    e["v"] = static_cast<std::uint64_t>(f.vertex);
    e["p"] = {f.position.x(), f.position.y(), f.position.z()};
    e["d"] = f.duration;
    j["fixations"].push_back(e);
  }
  return j.dump(2) + "\n";
}

Scanpath scanpath_from_json(const std::string& text) {
  Scanpath s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.mesh = j.value("mesh", std::string{});
    for (const auto& e : j.at("fixations")) {
      Fixation f;
      f.vertex = static_cast<Index>(e.at("v").get<std::uint64_t>());
      const auto& p = e.at("p");
      if (p.size() != 3) throw ParseError("fixation position needs 3 entries");
      f.position = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      f.duration = e.at("d").get<double>();
      if (!(f.duration > 0.0)) throw ParseError("fixation duration must be > 0");
      s.fixations.push_back(f);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scanpath JSON: ") + e.what());
  }
  return s;
}

void save_scanpath(const Scanpath& path, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << scanpath_to_json(path);
}

Scanpath load_scanpath(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scanpath_from_json(ss.str());
}

}  // namespace meshattn
