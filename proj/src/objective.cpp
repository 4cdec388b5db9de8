#include "stepalign/objective.hpp"

#include <algorithm>
#include <sstream>

namespace stepalign {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::info_nce: return "clip";
    case LossKind::cosine: return "cos";
    case LossKind::video_diagram: return "A";
    case LossKind::video_manual: return "B";
    case LossKind::intra_manual: return "C";
  }
  return "?";
}

std::string to_string(const LossTerm& t) { return to_string(t.kind) + ":" + to_string(t.granularity); }

namespace {

LossKind parse_kind(const std::string& s) {
  if (s == "clip" || s == "infonce" || s == "info_nce") return LossKind::info_nce;
  if (s == "cos" || s == "cosine") return LossKind::cosine;
  if (s == "A" || s == "a") return LossKind::video_diagram;
  if (s == "B" || s == "b") return LossKind::video_manual;
  if (s == "C" || s == "c") return LossKind::intra_manual;
  fail("unknown loss '" + s + "' (expected A, B, C, clip or cos)");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<LossTerm> parse_loss_terms(const std::string& text) {
  std::vector<LossTerm> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    LossTerm t;
    const auto colon = item.find(':');
    t.kind = parse_kind(trim(item.substr(0, colon)));
    t.granularity = colon == std::string::npos ? Granularity::step : parse_granularity(trim(item.substr(colon + 1)));
    if (std::find(out.begin(), out.end(), t) != out.end()) fail("loss term " + to_string(t) + " listed twice");
    out.push_back(t);
  }
  if (out.empty()) fail("no loss terms given");
  return out;
}

std::string format_loss_terms(const std::vector<LossTerm>& terms) {
  std::string out;
  for (const LossTerm& t : terms) {
    if (!out.empty()) out += ",";
    out += to_string(t);
  }
  return out;
}

bool uses_pair_batch(LossKind k) {
  return k == LossKind::info_nce || k == LossKind::cosine || k == LossKind::video_diagram;
}

const std::vector<LossPreset>& loss_presets() {
  using K = LossKind;
  constexpr auto S = Granularity::step;
  constexpr auto P = Granularity::page;
  static const std::vector<LossPreset> presets = {
      {"CosSim", {{K::cosine, S}}, 256},
      {"CLIP", {{K::info_nce, S}}, 256},
      {"A1", {{K::video_diagram, S}}, 256},
      {"A2", {{K::video_diagram, P}}, 256},
      {"A3", {{K::video_diagram, S}, {K::video_diagram, P}}, 256},
      {"B1", {{K::video_manual, S}}, 128},
      {"B2", {{K::video_manual, P}}, 128},
      {"B3", {{K::video_manual, S}, {K::video_manual, P}}, 128},
      {"C1", {{K::video_diagram, S}, {K::video_manual, S}}, 128},
      {"C2", {{K::video_diagram, P}, {K::video_manual, P}}, 128},
      {"C3", {{K::video_diagram, S}, {K::video_diagram, P}, {K::video_manual, S}, {K::video_manual, P}}, 128},
      {"D1", {{K::video_manual, S}, {K::video_manual, P}, {K::intra_manual, S}, {K::intra_manual, P}}, 128},
      {"D2",
       {{K::video_diagram, S}, {K::video_diagram, P}, {K::video_manual, S}, {K::video_manual, P},
        {K::intra_manual, S}, {K::intra_manual, P}},
       128},
  };
  return presets;
}

const LossPreset& find_loss_preset(const std::string& name) {
  for (const LossPreset& p : loss_presets())
    if (p.name == name) return p;
  std::string known;
  for (const LossPreset& p : loss_presets()) known += (known.empty() ? "" : ", ") + p.name;
  fail("unknown loss preset '" + name + "' (known: " + known + ")");
}

}  // namespace stepalign
