#pragma once

#include "stepalign/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stepalign {

/// Id-keyed table of equal-length float vectors, kept in insertion order.
///
/// On disk (`.emb`, all integers little-endian):
///   "EMB1" | u32 dim | u64 count | count × ( u16 id_len | id bytes (UTF-8) | dim × f32 )
class EmbeddingTable {
 public:
  static constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

  EmbeddingTable() = default;
  explicit EmbeddingTable(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  /// Appends a row. Rejects duplicate ids, wrong length, and non-finite components.
  void add(const std::string& id, std::span<const float> values);
  void add(const std::string& id, const VectorXf& values) { add(id, std::span<const float>(values.data(), values.size())); }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::optional<std::size_t> find(const std::string& id) const;

  const std::string& id(std::size_t row) const { return ids_[row]; }
  const std::vector<std::string>& ids() const { return ids_; }

  Eigen::Map<const VectorXf> row(std::size_t r) const {
    return Eigen::Map<const VectorXf>(data_.data() + r * static_cast<std::size_t>(dim_), dim_);
  }
  /// Throws when the id is absent.
  Eigen::Map<const VectorXf> at(const std::string& id) const;

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  int dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

void write_embedding_table(const EmbeddingTable& table, std::ostream& out);
EmbeddingTable read_embedding_table(std::istream& in);

void write_embedding_table(const EmbeddingTable& table, const std::string& path);
EmbeddingTable read_embedding_table(const std::string& path);

/// Reads consecutive tables until end of stream (checkpoints are stored this way).
std::vector<EmbeddingTable> read_embedding_tables(std::istream& in);

/// Writes to `path.tmp` and renames, so readers never observe a partial file.
void write_file_atomically(const std::string& path, const std::string& bytes);

}  // namespace stepalign
