#include "stepalign/dataset.hpp"

#include "stepalign/embedding_table.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace stepalign {

using nlohmann::json;

Granularity parse_granularity(const std::string& s) {
  if (s == "step" || s == "S") return Granularity::step;
  if (s == "page" || s == "P") return Granularity::page;
  fail("unknown granularity '" + s + "' (expected step or page)");
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val" || s == "validation") return Split::val;
  if (s == "test") return Split::test;
  fail("unknown split '" + s + "'");
}

namespace {

void check_diagram_list(const Manual& m, std::vector<DiagramRef>& list, Granularity g) {
  for (std::size_t k = 0; k < list.size(); ++k) {
    DiagramRef& d = list[k];
    if (d.index != static_cast<int>(k) + 1)
      fail("manual '" + m.manual_id + "': " + to_string(g) + " indices are not contiguous 1.." +
           std::to_string(list.size()) + " (diagram '" + d.diagram_id + "' has index " + std::to_string(d.index) + ")");
    d.manual_id = m.manual_id;
    d.granularity = g;
  }
}

}  // namespace

void Dataset::build() {
  manual_index_.clear();
  video_index_.clear();
  segment_index_.clear();
  diagram_index_.clear();
  split_index_.clear();

  for (std::size_t i = 0; i < manuals.size(); ++i) {
    Manual& m = manuals[i];
    if (!manual_index_.emplace(m.manual_id, i).second) fail("duplicate manual id '" + m.manual_id + "'");
    if (m.steps.empty()) fail("manual '" + m.manual_id + "' has no steps");
    check_diagram_list(m, m.steps, Granularity::step);
    check_diagram_list(m, m.pages, Granularity::page);
    for (const auto* list : {&m.steps, &m.pages})
      for (const DiagramRef& d : *list)
        if (!diagram_index_.emplace(d.diagram_id, d).second) fail("duplicate diagram id '" + d.diagram_id + "'");
  }

  for (std::size_t v = 0; v < videos.size(); ++v) {
    const VideoRecord& rec = videos[v];
    if (!video_index_.emplace(rec.video_id, v).second) fail("duplicate video id '" + rec.video_id + "'");
    auto mit = manual_index_.find(rec.manual_id);
    if (mit == manual_index_.end())
      fail("video '" + rec.video_id + "' references unknown manual '" + rec.manual_id + "'");
    const Manual& m = manuals[mit->second];
    if (!(rec.duration > 0.0)) fail("video '" + rec.video_id + "' has non-positive duration");
    if (!(rec.fps > 0.0)) fail("video '" + rec.video_id + "' has non-positive fps");
    for (std::size_t s = 0; s < rec.segments.size(); ++s) {
      const Segment& seg = rec.segments[s];
      if (!segment_index_.emplace(seg.segment_id, SegmentHandle{v, s}).second)
        fail("duplicate segment id '" + seg.segment_id + "'");
      if (!(seg.t_start >= 0.0 && seg.t_start < seg.t_end && seg.t_end <= rec.duration))
        fail("segment '" + seg.segment_id + "' is outside [0, duration] or empty");
      if (seg.gt_step_index && (*seg.gt_step_index < 1 || *seg.gt_step_index > static_cast<int>(m.steps.size())))
        fail("segment '" + seg.segment_id + "' has step index " + std::to_string(*seg.gt_step_index) +
             " outside manual '" + m.manual_id + "'");
      if (seg.gt_page_index && (*seg.gt_page_index < 1 || *seg.gt_page_index > static_cast<int>(m.pages.size())))
        fail("segment '" + seg.segment_id + "' has page index " + std::to_string(*seg.gt_page_index) +
             " outside manual '" + m.manual_id + "'");
    }
  }

  // First listing wins; duplicates and unknown ids surface in validate_dataset.
  for (const auto& [split, ids] : splits)
    for (const std::string& id : ids) split_index_.emplace(id, split);
}

const Manual& Dataset::manual(const std::string& manual_id) const { return manuals[manual_index(manual_id)]; }

std::size_t Dataset::manual_index(const std::string& manual_id) const {
  auto it = manual_index_.find(manual_id);
  if (it == manual_index_.end()) fail("unknown manual '" + manual_id + "'");
  return it->second;
}

const VideoRecord& Dataset::video(const std::string& video_id) const {
  auto it = video_index_.find(video_id);
  if (it == video_index_.end()) fail("unknown video '" + video_id + "'");
  return videos[it->second];
}

std::optional<SegmentHandle> Dataset::find_segment(const std::string& segment_id) const {
  auto it = segment_index_.find(segment_id);
  if (it == segment_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<DiagramRef> Dataset::find_diagram(const std::string& diagram_id) const {
  auto it = diagram_index_.find(diagram_id);
  if (it == diagram_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Split> Dataset::split_of(const std::string& video_id) const {
  auto it = split_index_.find(video_id);
  if (it == split_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Dataset::videos_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < videos.size(); ++v)
    if (split_of(videos[v].video_id) == s) out.push_back(v);
  return out;
}

std::size_t Dataset::segment_count() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.segments.size();
  return n;
}

std::size_t Dataset::furniture_count() const {
  std::set<std::string> ids;
  for (const auto& m : manuals) ids.insert(m.furniture_id);
  return ids.size();
}

DatasetSummary summarize(const Dataset& ds) {
  DatasetSummary s;
  s.furniture = ds.furniture_count();
  s.manuals = ds.manuals.size();
  s.videos = ds.videos.size();
  for (const auto& m : ds.manuals) {
    s.steps += m.steps.size();
    s.pages += m.pages.size();
  }
  for (const auto& v : ds.videos) {
    s.segments += v.segments.size();
    for (const auto& seg : v.segments)
      if (seg.gt_step_index) ++s.labeled_segments;
  }
  return s;
}

std::string format_summary(const DatasetSummary& s) {
  std::ostringstream out;
  out << s.furniture << " furniture, " << s.manuals << " manuals, " << s.steps << " steps, " << s.pages << " pages, "
      << s.videos << " videos, " << s.segments << " segments (" << s.labeled_segments << " labeled)";
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON manifest

namespace {

std::vector<DiagramRef> parse_diagrams(const json& arr) {
  std::vector<DiagramRef> out;
  if (arr.is_null()) return out;
  for (const json& d : arr) {
    DiagramRef ref;
    ref.diagram_id = d.at("diagram_id").get<std::string>();
    ref.index = d.at("index").get<int>();
    out.push_back(std::move(ref));
  }
  return out;
}

json dump_diagrams(const std::vector<DiagramRef>& list) {
  json arr = json::array();
  for (const DiagramRef& d : list) arr.push_back({{"diagram_id", d.diagram_id}, {"index", d.index}});
  return arr;
}

std::optional<int> opt_int(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<int>();
}

}  // namespace

Dataset parse_manifest(const std::string& json_text) {
  Dataset ds;
  try {
    const json doc = json::parse(json_text);
    for (const json& m : doc.at("manuals")) {
      Manual man;
      man.manual_id = m.at("manual_id").get<std::string>();
      man.furniture_id = m.value("furniture_id", man.manual_id);
      man.steps = parse_diagrams(m.at("steps"));
      man.pages = parse_diagrams(m.value("pages", json::array()));
      ds.manuals.push_back(std::move(man));
    }
    for (const json& v : doc.at("videos")) {
      VideoRecord rec;
      rec.video_id = v.at("video_id").get<std::string>();
      rec.manual_id = v.at("manual_id").get<std::string>();
      rec.duration = v.at("duration").get<double>();
      rec.fps = v.value("fps", 30.0);
      if (auto it = v.find("attributes"); it != v.end())
        for (const auto& [k, val] : it->items()) rec.attributes[k] = val.is_string() ? val.get<std::string>() : val.dump();
      for (const json& s : v.at("segments")) {
        Segment seg;
        seg.segment_id = s.at("segment_id").get<std::string>();
        seg.t_start = s.at("t_start").get<double>();
        seg.t_end = s.at("t_end").get<double>();
        seg.gt_step_index = opt_int(s, "gt_step_index");
        seg.gt_page_index = opt_int(s, "gt_page_index");
        rec.segments.push_back(std::move(seg));
      }
      ds.videos.push_back(std::move(rec));
    }
    if (auto it = doc.find("splits"); it != doc.end() && !it->is_null())
      for (const auto& [name, ids] : it->items()) {
        auto& list = ds.splits[parse_split(name)];
        for (const json& id : ids) list.push_back(id.get<std::string>());
      }
  } catch (const json::exception& e) {
    fail(std::string("manifest parse failure: ") + e.what());
  }
  ds.build();
  return ds;
}

Dataset load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open manifest '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

std::string dump_manifest(const Dataset& ds) {
  json doc;
  doc["manuals"] = json::array();
  for (const Manual& m : ds.manuals)
    doc["manuals"].push_back({{"manual_id", m.manual_id},
                              {"furniture_id", m.furniture_id},
                              {"steps", dump_diagrams(m.steps)},
                              {"pages", dump_diagrams(m.pages)}});
  doc["videos"] = json::array();
  for (const VideoRecord& v : ds.videos) {
    json segs = json::array();
    for (const Segment& s : v.segments) {
      json js = {{"segment_id", s.segment_id}, {"t_start", s.t_start}, {"t_end", s.t_end}};
      js["gt_step_index"] = s.gt_step_index ? json(*s.gt_step_index) : json(nullptr);
      js["gt_page_index"] = s.gt_page_index ? json(*s.gt_page_index) : json(nullptr);
      segs.push_back(std::move(js));
    }
    json jv = {{"video_id", v.video_id}, {"manual_id", v.manual_id}, {"duration", v.duration}, {"fps", v.fps}};
    jv["attributes"] = json::object();
    for (const auto& [k, val] : v.attributes) jv["attributes"][k] = val;
    jv["segments"] = std::move(segs);
    doc["videos"].push_back(std::move(jv));
  }
  doc["splits"] = json::object();
  for (const auto& [split, ids] : ds.splits) doc["splits"][to_string(split)] = ids;
  return doc.dump(1) + "\n";
}

void save_manifest(const Dataset& ds, const std::string& path) { write_file_atomically(path, dump_manifest(ds)); }

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_dataset(const Dataset& ds, const EmbeddingTable& diagrams, const EmbeddingTable& clips,
                                  std::optional<int> expected_diagram_dim, std::optional<int> expected_clip_dim) {
  ValidationReport report;

  std::set<std::string> clip_segments;  // ids with window rows "seg@frame"
  for (const std::string& id : clips.ids()) {
    auto at = id.rfind('@');
    clip_segments.insert(at == std::string::npos ? id : id.substr(0, at));
  }
  for (const VideoRecord& v : ds.videos)
    for (const Segment& s : v.segments)
      if (!clips.contains(s.segment_id) && !clip_segments.count(s.segment_id))
        report.missing_segment_embeddings.push_back(s.segment_id);

  for (const Manual& m : ds.manuals)
    for (const auto* list : {&m.steps, &m.pages})
      for (const DiagramRef& d : *list)
        if (!diagrams.contains(d.diagram_id)) report.missing_diagram_embeddings.push_back(d.diagram_id);

  if (expected_diagram_dim && diagrams.dim() != *expected_diagram_dim)
    report.dimension_mismatches.push_back("diagram table dim " + std::to_string(diagrams.dim()) + " != expected " +
                                          std::to_string(*expected_diagram_dim));
  if (expected_clip_dim && clips.dim() != *expected_clip_dim)
    report.dimension_mismatches.push_back("clip table dim " + std::to_string(clips.dim()) + " != expected " +
                                          std::to_string(*expected_clip_dim));

  std::map<std::string, std::set<Split>> seen;
  for (const auto& [split, ids] : ds.splits)
    for (const std::string& id : ids) seen[id].insert(split);
  for (const auto& [id, which] : seen) {
    bool known = std::any_of(ds.videos.begin(), ds.videos.end(), [&](const VideoRecord& v) { return v.video_id == id; });
    if (!known) {
      report.leakage.push_back("split lists unknown video '" + id + "'");
    } else if (which.size() > 1) {
      std::string names;
      for (Split s : which) names += std::string(names.empty() ? "" : ",") + to_string(s);
      report.leakage.push_back("video '" + id + "' appears in splits " + names);
    }
  }
  return report;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& s : missing_segment_embeddings) out << "missing segment embedding: " << s << "\n";
  for (const auto& s : missing_diagram_embeddings) out << "missing diagram embedding: " << s << "\n";
  for (const auto& s : dimension_mismatches) out << "dimension mismatch: " << s << "\n";
  for (const auto& s : leakage) out << "leakage: " << s << "\n";
  return out.str();
}

}  // namespace stepalign
