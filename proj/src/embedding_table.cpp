#include "stepalign/embedding_table.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace stepalign {

namespace {

static_assert(std::numeric_limits<float>::is_iec559, "f32 payloads assume IEEE-754 floats");

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return true;
}

}  // namespace

EmbeddingTable::EmbeddingTable(int dim) : dim_(dim) {
  if (dim <= 0) fail("embedding dim must be positive, got " + std::to_string(dim));
}

void EmbeddingTable::add(const std::string& id, std::span<const float> values) {
  if (dim_ <= 0) fail("embedding table has no dimension");
  if (static_cast<int>(values.size()) != dim_)
    fail("embedding '" + id + "' has " + std::to_string(values.size()) + " values, table dim is " + std::to_string(dim_));
  if (id.size() > std::numeric_limits<std::uint16_t>::max()) fail("embedding id too long: " + id.substr(0, 32) + "...");
  for (float v : values)
    if (!std::isfinite(v)) fail("embedding '" + id + "' has a non-finite component");
  if (!index_.emplace(id, ids_.size()).second) fail("duplicate embedding id '" + id + "'");
  ids_.push_back(id);
  data_.insert(data_.end(), values.begin(), values.end());
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::Map<const VectorXf> EmbeddingTable::at(const std::string& id) const {
  auto r = find(id);
  if (!r) fail("no embedding for id '" + id + "'");
  return row(*r);
}

void write_embedding_table(const EmbeddingTable& table, std::ostream& out) {
  if (table.dim() <= 0) fail("cannot write embedding table with dim " + std::to_string(table.dim()));
  out.write(EmbeddingTable::kMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(table.size()));
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string& id = table.id(r);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    auto v = table.row(r);
    for (Index k = 0; k < v.size(); ++k) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v[k]));
  }
  if (!out) fail("write failure while writing embedding table");
}

EmbeddingTable read_embedding_table(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, EmbeddingTable::kMagic, 4) != 0)
    fail("embedding file: magic mismatch (expected EMB1)");
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  if (!get_le(in, dim) || !get_le(in, count)) fail("embedding file: truncated header");
  if (dim == 0 || dim > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
    fail("embedding file: invalid dim " + std::to_string(dim));
  EmbeddingTable table(static_cast<int>(dim));
  std::vector<float> values(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    std::uint16_t len = 0;
    if (!get_le(in, len))
      fail("embedding file: truncated payload, declared " + std::to_string(count) + " rows, found " + std::to_string(r));
    std::string id(len, '\0');
    if (len > 0 && !in.read(id.data(), len))
      fail("embedding file: truncated payload in id of row " + std::to_string(r));
    for (std::uint32_t k = 0; k < dim; ++k) {
      std::uint32_t bits = 0;
      if (!get_le(in, bits))
        fail("embedding file: truncated payload, declared " + std::to_string(count) + " rows, row " +
             std::to_string(r) + " incomplete");
      values[k] = std::bit_cast<float>(bits);
    }
    table.add(id, values);
  }
  return table;
}

void write_embedding_table(const EmbeddingTable& table, const std::string& path) {
  std::ostringstream buf(std::ios::binary);
  write_embedding_table(table, buf);
  write_file_atomically(path, buf.str());
}

EmbeddingTable read_embedding_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open embedding file '" + path + "'");
  return read_embedding_table(in);
}

std::vector<EmbeddingTable> read_embedding_tables(std::istream& in) {
  std::vector<EmbeddingTable> tables;
  while (in.peek() != std::char_traits<char>::eof()) tables.push_back(read_embedding_table(in));
  return tables;
}

void write_file_atomically(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("write failure on '" + tmp + "'");
  }
  fs::rename(tmp, target);
}

}  // namespace stepalign
