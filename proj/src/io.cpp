#include "meshattn/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "meshattn/binary.hpp"

namespace meshattn {

namespace {

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

SaliencyMap SaliencyMap::normalized() const {
  const double sum = values.sum();
  if (!(sum > 0.0)) throw InvalidArgument("saliency map has no positive mass");
  return SaliencyMap{values / sum};
}

SaliencyMap load_saliency_text(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  std::vector<double> v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      const double x = std::stod(line, &used);
      if (line.find_first_not_of(" \t\r", used) != std::string::npos)
        throw std::invalid_argument(line);
      if (!(x >= 0.0)) throw ParseError("line " + std::to_string(lineno) +
                                        ": saliency must be >= 0");
      v.push_back(x);
    } catch (const std::logic_error&) {
      throw ParseError("line " + std::to_string(lineno) + ": not a number");
    }
  }
  return SaliencyMap{Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()))};
}

void save_saliency_text(const SaliencyMap& map, const std::filesystem::path& path) {
  auto out = open_out(path);
  char buf[40];
  for (Index i = 0; i < map.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", map.values[i]);
    out << buf;
  }
}

SaliencyMap load_saliency_binary(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  binary::expect_magic(in, "SMAP");
  if (binary::read<std::uint32_t>(in) != 1)
    throw ParseError("unsupported .smap version");
  const auto n = binary::read<std::uint64_t>(in);
  SaliencyMap map{VectorXd(static_cast<Index>(n))};
  for (std::uint64_t i = 0; i < n; ++i) {
    const float x = binary::read<float>(in);
    if (!(x >= 0.0f)) throw ParseError(".smap value must be >= 0");
    map.values[static_cast<Index>(i)] = x;
  }
  return map;
}

void save_saliency_binary(const SaliencyMap& map,
                          const std::filesystem::path& path) {
  auto out = open_out(path);
  binary::write_magic(out, "SMAP");
  binary::write<std::uint32_t>(out, 1);
  binary::write<std::uint64_t>(out, static_cast<std::uint64_t>(map.size()));
  for (Index i = 0; i < map.size(); ++i)
    binary::write<float>(out, static_cast<float>(map.values[i]));
}

SaliencyMap load_saliency(const std::filesystem::path& path) {
  return path.extension() == ".smap" ? load_saliency_binary(path)
                                     : load_saliency_text(path);
}

void save_saliency(const SaliencyMap& map, const std::filesystem::path& path) {
  if (path.extension() == ".smap")
    save_saliency_binary(map, path);
  else
    save_saliency_text(map, path);
}

FixationSet load_fixations(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  FixationSet fix;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long idx = -1;
    if (!(ls >> idx) || idx < 0)
      throw ParseError("line " + std::to_string(lineno) + ": bad vertex index");
    fix.push_back(idx);
  }
  return fix;
}

void save_fixations(const FixationSet& fix, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (Index f : fix) out << f << '\n';
}

FeatureField load_featb(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  binary::expect_magic(in, "SGFT");
  if (binary::read<std::uint32_t>(in) != 1)
    throw ParseError("unsupported .featb version");
  const auto n = binary::read<std::uint64_t>(in);
  const auto d = binary::read<std::uint32_t>(in);
  FeatureField field(static_cast<Index>(n), static_cast<Index>(d));
  for (Index i = 0; i < field.n(); ++i)
    for (Index c = 0; c < field.dim(); ++c)
      field.data(i, c) = binary::read<float>(in);
  for (auto& cov : field.coverage) cov = binary::read<std::uint16_t>(in);
  return field;
}

void save_featb(const FeatureField& field, const std::filesystem::path& path) {
  auto out = open_out(path);
  binary::write_magic(out, "SGFT");
  binary::write<std::uint32_t>(out, 1);
  binary::write<std::uint64_t>(out, static_cast<std::uint64_t>(field.n()));
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(field.dim()));
  for (Index i = 0; i < field.n(); ++i)
    for (Index c = 0; c < field.dim(); ++c)
      binary::write<float>(out, field.data(i, c));
  for (std::uint16_t cov : field.coverage) binary::write<std::uint16_t>(out, cov);
}

}  // namespace meshattn
