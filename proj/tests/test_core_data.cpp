#include "doctest.h"
#include "helpers.hpp"

#include "stepalign/dataset.hpp"
#include "stepalign/embedding_table.hpp"

#include <cstring>
#include <functional>
#include <random>
#include <sstream>

using namespace stepalign;

namespace {

std::string to_bytes(const EmbeddingTable& t) {
  std::ostringstream out;
  write_embedding_table(t, out);
  return out.str();
}

EmbeddingTable from_bytes(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_embedding_table(in);
}

bool throws_with(const std::function<void()>& f, const std::string& needle) {
  try {
    f();
  } catch (const Error& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

EmbeddingTable tiny_diagrams() {
  EmbeddingTable t(2);
  for (const char* id : {"m_s1", "m_s2", "m_s3", "m_p1", "m_p2"}) t.add(id, VectorXf::Ones(2));
  return t;
}

EmbeddingTable tiny_clips() {
  EmbeddingTable t(2);
  t.add("v_0", VectorXf::Ones(2));
  t.add("v_1", VectorXf::Ones(2));
  return t;
}

}  // namespace

TEST_CASE("embedding table round trip is byte exact") {
  EmbeddingTable t(2);
  t.add("a", VectorXf(Eigen::Vector2f(1, 0)));
  t.add("b", VectorXf(Eigen::Vector2f(0, 1)));
  const std::string bytes = to_bytes(t);
  CHECK(bytes.substr(0, 4) == "EMB1");
  // 4 magic + 4 dim + 8 count + 2 x (2 + 1 + 8)
  CHECK(bytes.size() == 16u + 2u * 11u);
  const EmbeddingTable back = from_bytes(bytes);
  CHECK(back == t);
  CHECK(to_bytes(back) == bytes);
  CHECK(back.at("b")[1] == 1.0f);
}

TEST_CASE("embedding table layout is little endian") {
  EmbeddingTable t(3);
  t.add("xy", VectorXf(Eigen::Vector3f(1.5f, -2.0f, 0.25f)));
  const std::string b = to_bytes(t);
  CHECK(static_cast<unsigned char>(b[4]) == 3);
  CHECK(static_cast<unsigned char>(b[8]) == 1);
  CHECK(static_cast<unsigned char>(b[16]) == 2);
  CHECK(b.substr(18, 2) == "xy");
  float v = 0;
  std::memcpy(&v, b.data() + 20 + 4, 4);
  CHECK(v == -2.0f);
}

TEST_CASE("random tables round trip") {
  std::mt19937_64 rng(7);
  std::normal_distribution<float> n;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 17);
    EmbeddingTable t(dim);
    const int rows = static_cast<int>(rng() % 30);
    for (int r = 0; r < rows; ++r) {
      VectorXf v(dim);
      for (int k = 0; k < dim; ++k) v[k] = n(rng);
      t.add("id_" + std::to_string(r) + std::string(rng() % 4, 'x'), v);
    }
    const std::string bytes = to_bytes(t);
    CHECK(to_bytes(from_bytes(bytes)) == bytes);
  }
}

TEST_CASE("step-diagram scale table round trips") {
  EmbeddingTable t(1024);
  VectorXf v(1024);
  for (int r = 0; r < 8263; ++r) {
    v.setConstant(static_cast<float>(r) * 1e-3f);
    v[r % 1024] = -1.0f;
    t.add("s" + std::to_string(r), v);
  }
  const EmbeddingTable back = from_bytes(to_bytes(t));
  CHECK(back.size() == 8263);
  CHECK(back == t);
}

TEST_CASE("embedding table rejects bad input") {
  EmbeddingTable t(2);
  t.add("a", VectorXf(Eigen::Vector2f(1, 0)));
  t.add("b", VectorXf(Eigen::Vector2f(0, 1)));
  std::string bytes = to_bytes(t);

  SUBCASE("count larger than the payload") {
    std::string bad = bytes;
    bad[8] = 3;
    CHECK(throws_with([&] { from_bytes(bad); }, "truncated"));
  }
  SUBCASE("cut inside a row") {
    CHECK(throws_with([&] { from_bytes(bytes.substr(0, bytes.size() - 3)); }, "truncated"));
  }
  SUBCASE("magic") {
    std::string bad = bytes;
    bad[3] = '2';
    CHECK(throws_with([&] { from_bytes(bad); }, "magic"));
  }
  SUBCASE("zero dim") {
    std::string bad = bytes;
    bad[4] = 0;
    CHECK_THROWS_AS(from_bytes(bad), Error);
    CHECK_THROWS_AS(EmbeddingTable(0), Error);
  }
  SUBCASE("duplicates, wrong width, non-finite") {
    CHECK(throws_with([&] { t.add("a", VectorXf(Eigen::Vector2f(1, 1))); }, "duplicate"));
    CHECK_THROWS_AS(t.add("c", VectorXf(Eigen::Vector3f(1, 1, 1))), Error);
    CHECK_THROWS_AS(t.add("d", VectorXf(Eigen::Vector2f(std::nanf(""), 1))), Error);
    CHECK(t.size() == 2);
  }
  SUBCASE("unknown id") { CHECK(throws_with([&] { t.at("zz"); }, "zz")); }
}

TEST_CASE("manifest with one manual and one video") {
  const Dataset ds = testutil::tiny_dataset();
  CHECK(ds.manuals.size() == 1);
  CHECK(ds.manual("m").steps.size() == 3);
  CHECK(ds.videos[0].segments.size() == 2);
  CHECK(ds.segment_count() == 2);
  const auto h = ds.find_segment("v_1");
  REQUIRE(h);
  CHECK(ds.videos[h->video].segments[h->segment].gt_step_index == 3);
  CHECK(ds.find_diagram("m_p2")->index == 2);
  CHECK(ds.split_of("v") == Split::train);
}

TEST_CASE("manifest save and load is the identity") {
  Dataset ds = testutil::tiny_dataset();
  ds.videos[0].attributes["viewpoint"] = "first-person";
  ds.videos[0].segments.push_back({"v_2", 20.0, 25.5, std::nullopt, std::nullopt});
  ds.build();
  const std::string text = dump_manifest(ds);
  const Dataset back = parse_manifest(text);
  CHECK(dump_manifest(back) == text);
  CHECK(!back.videos[0].segments[2].gt_step_index);
  CHECK(back.videos[0].attributes.at("viewpoint") == "first-person");
}

TEST_CASE("manifest errors name the offender") {
  Dataset ds = testutil::tiny_dataset();
  SUBCASE("unknown manual") {
    ds.videos[0].manual_id = "X";
    CHECK(throws_with([&] { ds.build(); }, "'X'"));
  }
  SUBCASE("non-contiguous indices") {
    ds.manuals[0].steps[2].index = 4;
    CHECK(throws_with([&] { ds.build(); }, "'m'"));
  }
  SUBCASE("label beyond the manual") {
    ds.videos[0].segments[1].gt_step_index = 4;
    CHECK(throws_with([&] { ds.build(); }, "v_1"));
  }
  SUBCASE("segment outside the video") {
    ds.videos[0].segments[1].t_end = 31.0;
    CHECK(throws_with([&] { ds.build(); }, "v_1"));
  }
  SUBCASE("malformed json") { CHECK(throws_with([] { parse_manifest("{\"manuals\": ["); }, "manifest")); }
}

TEST_CASE("summary echoes dataset scale") {
  Dataset ds;
  for (int f = 0; f < 420; ++f) {
    Manual m;
    m.manual_id = "m" + std::to_string(f);
    m.furniture_id = "f" + std::to_string(f);
    m.steps.push_back({m.manual_id + "_s1", m.manual_id, 1, Granularity::step});
    ds.manuals.push_back(m);
  }
  for (int v = 0; v < 1005; ++v) {
    VideoRecord r;
    r.video_id = "v" + std::to_string(v);
    r.manual_id = "m" + std::to_string(v % 420);
    r.duration = 20.0;
    r.segments.push_back({r.video_id + "_0", 0.0, 10.0, 1, std::nullopt});
    ds.videos.push_back(r);
  }
  ds.build();
  const DatasetSummary s = summarize(ds);
  CHECK(s.furniture == 420);
  CHECK(s.videos == 1005);
  CHECK(format_summary(s).find("1005") != std::string::npos);
}

TEST_CASE("validation report") {
  Dataset ds = testutil::tiny_dataset();
  SUBCASE("complete") { CHECK(validate_dataset(ds, tiny_diagrams(), tiny_clips()).empty()); }
  SUBCASE("one missing diagram") {
    EmbeddingTable d(2);
    for (const char* id : {"m_s1", "m_s3", "m_p1", "m_p2"}) d.add(id, VectorXf::Ones(2));
    const auto r = validate_dataset(ds, d, tiny_clips());
    CHECK(r.size() == 1);
    REQUIRE(r.missing_diagram_embeddings.size() == 1);
    CHECK(r.missing_diagram_embeddings[0] == "m_s2");
  }
  SUBCASE("clip windows count as present") {
    EmbeddingTable c(2);
    c.add("v_0@0", VectorXf::Ones(2));
    c.add("v_1@59", VectorXf::Ones(2));
    CHECK(validate_dataset(ds, tiny_diagrams(), c).empty());
  }
  SUBCASE("leakage") {
    ds.splits[Split::test] = {"v"};
    const auto r = validate_dataset(ds, tiny_diagrams(), tiny_clips());
    CHECK(r.leakage.size() == 1);
    CHECK(r.to_string().find("'v'") != std::string::npos);
  }
  SUBCASE("dimension mismatch") {
    CHECK(validate_dataset(ds, tiny_diagrams(), tiny_clips(), 1024, 2).dimension_mismatches.size() == 1);
  }
}

TEST_CASE("accepted datasets map labels to exactly one diagram") {
  const Dataset ds = testutil::tiny_dataset();
  for (const VideoRecord& v : ds.videos)
    for (const Segment& s : v.segments) {
      const Manual& m = ds.manual_of(v);
      int hits = 0;
      for (const DiagramRef& d : m.steps) hits += d.index == *s.gt_step_index;
      CHECK(hits == 1);
    }
  for (const Manual& m : ds.manuals)
    for (const DiagramRef& d : m.steps) CHECK(ds.find_diagram(d.diagram_id)->manual_id == m.manual_id);
}
