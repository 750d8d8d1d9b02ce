#include "meshattn/nn.hpp"

#include <fstream>

#include "meshattn/binary.hpp"

namespace meshattn::nn {

const NamedTensor& TensorTable::at(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ParseError("checkpoint has no tensor '" + name + "'");
}

void save_tensor_table(const TensorTable& table, const char (&magic)[5],
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  binary::write_magic(out, magic);
  binary::write<std::uint32_t>(out, 1);
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(table.tensors.size()));
  for (const auto& t : table.tensors) {
    binary::write_string(out, t.name);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
    for (float v : t.data) binary::write(out, v);
  }
  binary::write_string(out, table.config);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

TensorTable load_tensor_table(const char (&magic)[5], const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  binary::expect_magic(in, magic);
  if (binary::read<std::uint32_t>(in) != 1) throw ParseError("unsupported checkpoint version");
  const auto count = binary::read<std::uint32_t>(in);
  if (count > 4096) throw ParseError("tensor count out of range");
  TensorTable table;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = binary::read_string(in);
    t.rows = binary::read<std::uint32_t>(in);
    t.cols = binary::read<std::uint32_t>(in);
    if (t.rows * t.cols > (Index(1) << 28)) throw ParseError("tensor too large");
    t.data.resize(static_cast<std::size_t>(t.rows * t.cols));
    for (float& v : t.data) v = binary::read<float>(in);
    table.tensors.push_back(std::move(t));
  }
  table.config = binary::read_string(in);
  return table;
}

}  // namespace meshattn::nn
