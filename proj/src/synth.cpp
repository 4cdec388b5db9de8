#include "stepalign/synth.hpp"

#include "stepalign/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

namespace stepalign {

void SynthConfig::validate() const {
  if (manuals < 1) fail("synth: need at least one manual");
  if (min_steps < 1 || max_steps < min_steps || max_steps > 50) fail("synth: step range must lie within [1, 50]");
  if (min_segments_per_step < 1 || max_segments_per_step < min_segments_per_step)
    fail("synth: invalid segments-per-step range");
  if (videos_per_manual < 1) fail("synth: need at least one video per manual");
  if (dim < 2) fail("synth: embedding dim must be at least 2");
  if (!(sigma >= 0.0)) fail("synth: sigma must be non-negative");
  if (!(drift >= 0.0 && drift <= 1.0)) fail("synth: drift must lie in [0, 1]");
  if (clips_per_segment < 0) fail("synth: clips per segment must be non-negative");
}

namespace {

VectorXd random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  VectorXd v(dim);
  do {
    for (int k = 0; k < dim; ++k) v[k] = n(rng);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

/// Next prototype with cosine exactly `drift` to `prev`.
VectorXd walk_step(std::mt19937_64& rng, const VectorXd& prev, double drift) {
  VectorXd u;
  do {
    u = random_unit(rng, static_cast<int>(prev.size()));
    u -= u.dot(prev) * prev;
  } while (u.norm() < 1e-9);
  u.normalize();
  return drift * prev + std::sqrt(std::max(0.0, 1.0 - drift * drift)) * u;
}

VectorXf noisy(std::mt19937_64& rng, const VectorXd& proto, double sigma) {
  std::normal_distribution<double> n(0.0, sigma / std::sqrt(static_cast<double>(proto.size())));
  VectorXd v = proto;
  for (Index k = 0; k < v.size(); ++k) v[k] += n(rng);
  if (v.norm() < 1e-12) v = proto;
  return v.normalized().cast<float>();
}

std::string pad_num(int n, int width = 3) {
  std::string s = std::to_string(n);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SynthData out{Dataset{}, EmbeddingTable(cfg.dim), EmbeddingTable(cfg.dim)};
  Dataset& ds = out.dataset;

  std::uniform_int_distribution<int> steps_dist(cfg.min_steps, cfg.max_steps);
  std::uniform_int_distribution<int> segs_dist(cfg.min_segments_per_step, cfg.max_segments_per_step);
  std::uniform_int_distribution<int> page_span(1, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const char* viewpoints[] = {"first-person", "third-person"};
  const char* indoor[] = {"indoor", "outdoor"};
  const char* motion[] = {"static", "moving"};
  const char* assemblers[] = {"1", "2", "3+"};

  for (int mi = 0; mi < cfg.manuals; ++mi) {
    Manual man;
    man.manual_id = "m" + pad_num(mi);
    man.furniture_id = "f" + pad_num(mi);
    const int M = steps_dist(rng);

    std::vector<VectorXd> protos;
    protos.push_back(random_unit(rng, cfg.dim));
    for (int j = 1; j < M; ++j) protos.push_back(walk_step(rng, protos.back(), cfg.drift));
    for (int j = 1; j <= M; ++j) {
      const std::string id = man.manual_id + "_s" + pad_num(j, 2);
      man.steps.push_back({id, man.manual_id, j, Granularity::step});
      out.diagrams.add(id, VectorXf(protos[static_cast<std::size_t>(j - 1)].cast<float>()));
    }

    // Pages hold one or two consecutive steps.
    std::vector<int> page_of_step(static_cast<std::size_t>(M) + 1, 0);
    for (int j = 1, page = 1; j <= M; ++page) {
      const int span = std::min(page_span(rng), M - j + 1);
      VectorXd sum = VectorXd::Zero(cfg.dim);
      for (int k = 0; k < span; ++k) {
        page_of_step[static_cast<std::size_t>(j + k)] = page;
        sum += protos[static_cast<std::size_t>(j + k - 1)];
      }
      const std::string id = man.manual_id + "_p" + pad_num(page, 2);
      man.pages.push_back({id, man.manual_id, page, Granularity::page});
      out.diagrams.add(id, VectorXf(sum.normalized().cast<float>()));
      j += span;
    }

    for (int vi = 0; vi < cfg.videos_per_manual; ++vi) {
      VideoRecord rec;
      rec.video_id = man.manual_id + "_v" + pad_num(vi, 2);
      rec.manual_id = man.manual_id;
      rec.fps = kCanonicalFps;
      rec.attributes = {{"viewpoint", viewpoints[rng() % 2]},
                        {"indoor", indoor[rng() % 2]},
                        {"camera_motion", motion[rng() % 2]},
                        {"assemblers", assemblers[rng() % 3]}};
      double t = 5.0 * unit(rng);
      int seg_counter = 0;
      for (int j = 1; j <= M; ++j) {
        const int k = segs_dist(rng);
        // Action length so that segment_action yields about k segments.
        const double length = std::max(3.0, kSegmentSeconds * (k - 1) + kSegmentSeconds * (0.3 + 0.7 * unit(rng)));
        for (const ActionSegment& a : segment_action(t, t + length)) {
          Segment seg;
          seg.segment_id = rec.video_id + "_" + pad_num(seg_counter++);
          seg.t_start = a.t_start;
          seg.t_end = a.t_end;
          seg.gt_step_index = j;
          seg.gt_page_index = page_of_step[static_cast<std::size_t>(j)];
          rec.segments.push_back(seg);
        }
        t += length + 3.0 * unit(rng);
      }
      rec.duration = t + 10.0 * unit(rng);

      for (const Segment& seg : rec.segments) {
        const VectorXd& proto = protos[static_cast<std::size_t>(*seg.gt_step_index - 1)];
        if (cfg.clips_per_segment == 0) {
          out.clips.add(seg.segment_id, noisy(rng, proto, cfg.sigma));
        } else {
          auto windows = sample_clips(seg, SampleMode::test, 0);
          windows.resize(std::min<std::size_t>(windows.size(), static_cast<std::size_t>(cfg.clips_per_segment)));
          for (const ClipWindow& w : windows) out.clips.add(clip_row_id(w), noisy(rng, proto, cfg.sigma));
        }
      }
      ds.videos.push_back(std::move(rec));
    }
    ds.manuals.push_back(std::move(man));
  }

  ds.build();
  ds.splits = split_dataset(split_items(ds), cfg.ratios, cfg.seed).lists();
  ds.build();
  return out;
}

void write_synthetic(const SynthData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  save_manifest(data.dataset, (root / "manifest.json").string());
  write_embedding_table(data.diagrams, (root / "diagrams.emb").string());
  write_embedding_table(data.clips, (root / "clips.emb").string());
}

std::pair<int, int> parse_int_range(const std::string& text) {
  try {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
      const int v = std::stoi(text);
      return {v, v};
    }
    return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
  } catch (const std::exception&) {
    fail("bad integer range '" + text + "' (expected N or A..B)");
  }
}

}  // namespace stepalign
