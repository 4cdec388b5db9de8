#include "stepalign/checkpoint.hpp"

#include "stepalign/embedding_table.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace stepalign {

namespace {

EmbeddingTable matrix_table(const std::string& prefix, const MatrixXd& m) {
  EmbeddingTable t(static_cast<int>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) t.add(prefix + ":" + std::to_string(r), VectorXf(m.row(r).transpose().cast<float>()));
  return t;
}

EmbeddingTable vector_table(const std::string& prefix, const VectorXd& v) {
  EmbeddingTable t(static_cast<int>(v.size()));
  t.add(prefix + ":0", VectorXf(v.cast<float>()));
  return t;
}

MatrixXd table_matrix(const EmbeddingTable& t, const std::string& prefix) {
  MatrixXd m(static_cast<Index>(t.size()), t.dim());
  for (std::size_t r = 0; r < t.size(); ++r) {
    const std::string expect = prefix + ":" + std::to_string(r);
    if (t.id(r) != expect) fail("checkpoint: expected row '" + expect + "', found '" + t.id(r) + "'");
    m.row(static_cast<Index>(r)) = t.row(r).cast<double>().transpose();
  }
  return m;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  for (const auto& [tag, head] : {std::pair<std::string, const ProjectionHead<double>*>{"video", &ckpt.model.video},
                                  std::pair<std::string, const ProjectionHead<double>*>{"diagram", &ckpt.model.diagram}}) {
    write_embedding_table(matrix_table(tag + ".W1", head->W1), out);
    write_embedding_table(vector_table(tag + ".b1", head->b1), out);
    write_embedding_table(matrix_table(tag + ".W2", head->W2), out);
    write_embedding_table(vector_table(tag + ".b2", head->b2), out);
  }
  EmbeddingTable scalars(1);
  const auto& p = ckpt.model.params;
  auto put = [&](const char* id, double v) {
    const float f = static_cast<float>(v);
    scalars.add(id, std::span<const float>(&f, 1));
  };
  put("log_tau_A", p.log_tau_A);
  put("log_tau_B", p.log_tau_B);
  put("log_tau_C", p.log_tau_C);
  put("log_theta", p.log_theta);
  put("use_sprf", ckpt.use_sprf ? 1.0 : 0.0);
  write_embedding_table(scalars, out);
  return out.str();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  const auto tables = read_embedding_tables(in);
  if (tables.size() != 9) fail("checkpoint: expected 9 tables, found " + std::to_string(tables.size()));
  Checkpoint ckpt;
  std::size_t at = 0;
  for (const auto& entry : {std::pair<const char*, ProjectionHead<double>*>{"video", &ckpt.model.video},
                      std::pair<const char*, ProjectionHead<double>*>{"diagram", &ckpt.model.diagram}}) {
    const std::string tag = entry.first;
    ProjectionHead<double>& h = *entry.second;
    h.W1 = table_matrix(tables[at++], tag + ".W1");
    h.b1 = table_matrix(tables[at++], tag + ".b1").row(0).transpose();
    h.W2 = table_matrix(tables[at++], tag + ".W2");
    h.b2 = table_matrix(tables[at++], tag + ".b2").row(0).transpose();
    if (h.b1.size() != h.W1.rows() || h.W2.cols() != h.W1.rows() || h.b2.size() != h.W2.rows())
      fail("checkpoint: inconsistent shapes in " + tag + " head");
  }
  if (ckpt.model.video.out_dim() != ckpt.model.diagram.out_dim())
    fail("checkpoint: video and diagram heads project to different dimensions");
  const EmbeddingTable& s = tables[at];
  auto get = [&](const char* id) { return static_cast<double>(s.at(id)[0]); };
  ckpt.model.params.log_tau_A = get("log_tau_A");
  ckpt.model.params.log_tau_B = get("log_tau_B");
  ckpt.model.params.log_tau_C = get("log_tau_C");
  ckpt.model.params.log_theta = get("log_theta");
  ckpt.use_sprf = get("use_sprf") != 0.0;
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_atomically(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

Model<double> rounded_to_storage(const Model<double>& m) {
  return m.cast<float>().cast<double>();
}

}  // namespace stepalign
