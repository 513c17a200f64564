#include "osmsl/label_scheme.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "osmsl/error.hpp"

namespace osmsl {

namespace {

bool same_category(const LinkTag& a, const LinkTag& b) { return a.category == b.category; }

// Minimum number of shots that must follow a tag for the scene it belongs to
// to be closed by an N tag.
int shots_needed_after(LinkKind kind) {
  switch (kind) {
    case LinkKind::BtoI:
    case LinkKind::ItoI:
      return 2;
    case LinkKind::ItoE:
    case LinkKind::BtoE:
      return 1;
    case LinkKind::N:
      return 0;
  }
  return 0;
}

void check_tag(const LinkTag& tag, const LabelScheme& scheme) {
  if (scheme.has_categories()) {
    if (!tag.category) throw ValidationError("tag without category in SSC scheme");
    if (*tag.category < 0 || *tag.category >= scheme.num_categories()) {
      throw ValidationError("tag category out of range: " + std::to_string(*tag.category));
    }
  } else if (tag.category) {
    throw ValidationError("tag with category in SS scheme");
  }
}

}  // namespace

std::string_view kind_name(LinkKind kind) {
  switch (kind) {
    case LinkKind::BtoI:
      return "B-I";
    case LinkKind::ItoI:
      return "I-I";
    case LinkKind::ItoE:
      return "I-E";
    case LinkKind::BtoE:
      return "B-E";
    case LinkKind::N:
      return "N";
  }
  return "?";
}

LinkKind parse_kind(std::string_view text) {
  for (LinkKind kind : kAllKinds) {
    if (kind_name(kind) == text) return kind;
  }
  throw ValidationError("unknown link kind '" + std::string(text) + "'");
}

LabelScheme LabelScheme::segmentation() { return LabelScheme{}; }

LabelScheme LabelScheme::classification(std::vector<std::string> categories) {
  if (categories.empty()) throw ValidationError("SSC scheme needs at least one category");
  std::set<std::string> seen;
  for (const auto& name : categories) {
    if (name.empty()) throw ValidationError("empty category name");
    if (!seen.insert(name).second) throw ValidationError("duplicate category '" + name + "'");
  }
  LabelScheme scheme;
  scheme.mode_ = TaskMode::SSC;
  scheme.categories_ = std::move(categories);
  return scheme;
}

int LabelScheme::num_tags() const {
  return mode_ == TaskMode::SS ? kNumKinds : kNumKinds * num_categories();
}

LinkTag LabelScheme::tag(int index) const {
  if (index < 0 || index >= num_tags()) {
    throw ValidationError("tag index out of range: " + std::to_string(index));
  }
  LinkTag tag{kAllKinds[index % kNumKinds], std::nullopt};
  if (mode_ == TaskMode::SSC) tag.category = index / kNumKinds;
  return tag;
}

int LabelScheme::index_of(const LinkTag& tag) const {
  check_tag(tag, *this);
  const int kind = static_cast<int>(tag.kind);
  return mode_ == TaskMode::SS ? kind : *tag.category * kNumKinds + kind;
}

int LabelScheme::category_index(std::string_view name) const {
  auto it = std::find(categories_.begin(), categories_.end(), name);
  if (it == categories_.end()) throw ValidationError("unknown category '" + std::string(name) + "'");
  return static_cast<int>(it - categories_.begin());
}

const std::string& LabelScheme::category_name(int index) const {
  if (index < 0 || index >= num_categories()) {
    throw ValidationError("category index out of range: " + std::to_string(index));
  }
  return categories_[index];
}

std::string LabelScheme::tag_string(const LinkTag& tag) const {
  check_tag(tag, *this);
  std::string kind(kind_name(tag.kind));
  if (!tag.category) return kind;
  return categories_[*tag.category] + "_" + kind;
}

LinkTag LabelScheme::parse_tag(std::string_view text) const {
  if (mode_ == TaskMode::SS) return LinkTag{parse_kind(text), std::nullopt};
  const auto split = text.rfind('_');
  if (split == std::string_view::npos) {
    throw ValidationError("SSC tag '" + std::string(text) + "' lacks a category prefix");
  }
  return LinkTag{parse_kind(text.substr(split + 1)), category_index(text.substr(0, split))};
}

std::string LabelScheme::fingerprint() const {
  std::ostringstream out;
  if (mode_ == TaskMode::SS) {
    out << "SS";
  } else {
    out << "SSC";
    for (const auto& name : categories_) out << '|' << name;
  }
  return out.str();
}

std::vector<LinkTag> tag_table(const LabelScheme& scheme) {
  std::vector<LinkTag> table;
  table.reserve(scheme.num_tags());
  for (int i = 0; i < scheme.num_tags(); ++i) table.push_back(scheme.tag(i));
  return table;
}

void validate_partition(const std::vector<SceneAnnotation>& scenes, int n_shots) {
  if (n_shots < 1) throw ValidationError("video has no shots");
  if (scenes.empty()) throw ValidationError("no scenes for a video with " + std::to_string(n_shots) + " shots");
  int expected = 0;
  for (const auto& scene : scenes) {
    if (scene.start_shot > scene.end_shot) {
      throw ValidationError("scene [" + std::to_string(scene.start_shot) + "," +
                            std::to_string(scene.end_shot) + "] has start after end");
    }
    if (scene.start_shot < expected) {
      throw ValidationError("overlapping scenes: shot " + std::to_string(scene.start_shot) +
                            " assigned twice");
    }
    if (scene.start_shot > expected) {
      throw ValidationError("gap in scenes at shot " + std::to_string(expected));
    }
    expected = scene.end_shot + 1;
  }
  if (expected < n_shots) throw ValidationError("gap in scenes at shot " + std::to_string(expected));
  if (expected > n_shots) {
    throw ValidationError("scene ends at shot " + std::to_string(expected - 1) + " beyond video of " +
                          std::to_string(n_shots) + " shots");
  }
}

std::vector<LinkTag> encode(const std::vector<SceneAnnotation>& scenes, int n_shots,
                            const LabelScheme& scheme) {
  validate_partition(scenes, n_shots);
  std::vector<LinkTag> tags;
  tags.reserve(n_shots);
  for (const auto& scene : scenes) {
    if (scheme.has_categories()) {
      if (!scene.category) throw ValidationError("scene without category in SSC mode");
      if (*scene.category < 0 || *scene.category >= scheme.num_categories()) {
        throw ValidationError("scene category out of range: " + std::to_string(*scene.category));
      }
    }
    const std::optional<int> category = scheme.has_categories() ? scene.category : std::nullopt;
    const int length = scene.length();
    if (length >= 3) {
      tags.push_back({LinkKind::BtoI, category});
      for (int i = 0; i < length - 3; ++i) tags.push_back({LinkKind::ItoI, category});
      tags.push_back({LinkKind::ItoE, category});
    } else if (length == 2) {
      tags.push_back({LinkKind::BtoE, category});
    }
    tags.push_back({LinkKind::N, category});
  }
  return tags;
}

bool is_legal_start(const LinkTag& tag) {
  return tag.kind == LinkKind::BtoI || tag.kind == LinkKind::BtoE || tag.kind == LinkKind::N;
}

bool is_legal_end(const LinkTag& tag) { return tag.kind == LinkKind::N; }

bool is_legal_transition(const LabelScheme& /*scheme*/, const LinkTag& from, const LinkTag& to) {
  switch (from.kind) {
    case LinkKind::BtoI:
    case LinkKind::ItoI:
      return same_category(from, to) && (to.kind == LinkKind::ItoI || to.kind == LinkKind::ItoE);
    case LinkKind::ItoE:
    case LinkKind::BtoE:
      return same_category(from, to) && to.kind == LinkKind::N;
    case LinkKind::N:
      return is_legal_start(to);
  }
  return false;
}

int TransitionMask::count_allowed() const {
  return static_cast<int>(std::count(allowed.begin(), allowed.end(), std::uint8_t{1}));
}

TransitionMask transition_mask(const LabelScheme& scheme) {
  const auto table = tag_table(scheme);
  TransitionMask mask;
  mask.num_tags = scheme.num_tags();
  mask.allowed.assign(mask.num_tags * mask.num_tags, 0);
  mask.legal_start.assign(mask.num_tags, 0);
  mask.legal_end.assign(mask.num_tags, 0);
  for (int i = 0; i < mask.num_tags; ++i) {
    mask.legal_start[i] = is_legal_start(table[i]);
    mask.legal_end[i] = is_legal_end(table[i]);
    for (int j = 0; j < mask.num_tags; ++j) {
      mask.allowed[i * mask.num_tags + j] = is_legal_transition(scheme, table[i], table[j]);
    }
  }
  return mask;
}

std::vector<SceneAnnotation> decode(const std::vector<LinkTag>& tags, const LabelScheme& scheme) {
  std::vector<SceneAnnotation> scenes;
  if (tags.empty()) return scenes;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    check_tag(tags[i], scheme);
    const bool legal = i == 0 ? is_legal_start(tags[i]) : is_legal_transition(scheme, tags[i - 1], tags[i]);
    if (!legal) {
      // A category switch inside an open scene is reported separately.
      if (i > 0 && tags[i - 1].kind != LinkKind::N && tags[i - 1].category != tags[i].category) {
        throw GrammarError("mixed categories within one scene at position " + std::to_string(i), i);
      }
      throw GrammarError("illegal link tag at position " + std::to_string(i), i);
    }
  }
  if (!is_legal_end(tags.back())) {
    throw GrammarError("sequence does not end with N at position " + std::to_string(tags.size() - 1),
                       tags.size() - 1);
  }
  int start = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].kind == LinkKind::N) {
      scenes.push_back({start, static_cast<int>(i), tags[i].category});
      start = static_cast<int>(i) + 1;
    }
  }
  return scenes;
}

std::vector<LinkTag> repair(const std::vector<LinkTag>& tags, const LabelScheme& scheme) {
  static constexpr LinkKind kPreference[] = {LinkKind::ItoI, LinkKind::ItoE, LinkKind::BtoI,
                                             LinkKind::BtoE, LinkKind::N};
  const int n = static_cast<int>(tags.size());
  std::vector<LinkTag> out(tags);
  for (int i = 0; i < n; ++i) {
    const LinkTag* prev = i > 0 ? &out[i - 1] : nullptr;
    const LinkTag* next = i + 1 < n ? &tags[i + 1] : nullptr;
    const int remaining = n - 1 - i;

    auto fits_prev = [&](const LinkTag& t) {
      return prev ? is_legal_transition(scheme, *prev, t) : is_legal_start(t);
    };
    auto fits_next = [&](const LinkTag& t) {
      return next ? is_legal_transition(scheme, t, *next) : is_legal_end(t);
    };
    auto feasible = [&](const LinkTag& t) { return shots_needed_after(t.kind) <= remaining; };

    if (fits_prev(out[i]) && fits_next(out[i]) && feasible(out[i])) continue;

    std::vector<std::optional<int>> categories{out[i].category};
    if (prev && prev->category != out[i].category) categories.push_back(prev->category);

    std::optional<LinkTag> chosen;
    // First try to satisfy both neighbours, then only the left one.
    for (int pass = 0; pass < 2 && !chosen; ++pass) {
      for (const auto& category : categories) {
        for (LinkKind kind : kPreference) {
          LinkTag candidate{kind, category};
          if (fits_prev(candidate) && feasible(candidate) && (pass == 1 || fits_next(candidate))) {
            chosen = candidate;
            break;
          }
        }
        if (chosen) break;
      }
    }
    out[i] = *chosen;
  }
  return out;
}

std::vector<int> to_indices(const std::vector<LinkTag>& tags, const LabelScheme& scheme) {
  std::vector<int> indices;
  indices.reserve(tags.size());
  for (const auto& tag : tags) indices.push_back(scheme.index_of(tag));
  return indices;
}

std::vector<LinkTag> from_indices(const std::vector<int>& indices, const LabelScheme& scheme) {
  std::vector<LinkTag> tags;
  tags.reserve(indices.size());
  for (int index : indices) tags.push_back(scheme.tag(index));
  return tags;
}

}  // namespace osmsl
