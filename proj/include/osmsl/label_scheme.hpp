#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace osmsl {

/// Relation between a shot and its successor. The order is canonical and
/// fixes tag indices in checkpoints and transition masks.
enum class LinkKind : std::uint8_t { BtoI = 0, ItoI = 1, ItoE = 2, BtoE = 3, N = 4 };

inline constexpr int kNumKinds = 5;
inline constexpr LinkKind kAllKinds[kNumKinds] = {LinkKind::BtoI, LinkKind::ItoI, LinkKind::ItoE,
                                                  LinkKind::BtoE, LinkKind::N};

/// "B-I", "I-I", "I-E", "B-E", "N".
std::string_view kind_name(LinkKind kind);
LinkKind parse_kind(std::string_view text);

enum class TaskMode { SS, SSC };

struct LinkTag {
  LinkKind kind = LinkKind::N;
  std::optional<int> category;  // set iff the scheme is SSC

  friend bool operator==(const LinkTag&, const LinkTag&) = default;
};

/// A contiguous, inclusive shot span with an optional category.
struct SceneAnnotation {
  int start_shot = 0;
  int end_shot = 0;
  std::optional<int> category;

  int length() const { return end_shot - start_shot + 1; }
  friend bool operator==(const SceneAnnotation&, const SceneAnnotation&) = default;
};

/// Link-tag vocabulary: 5 tags in SS mode, 5*C in SSC mode, ordered
/// category-major, kind-minor.
class LabelScheme {
 public:
  static LabelScheme segmentation();
  static LabelScheme classification(std::vector<std::string> categories);

  TaskMode mode() const { return mode_; }
  bool has_categories() const { return mode_ == TaskMode::SSC; }
  int num_categories() const { return static_cast<int>(categories_.size()); }
  const std::vector<std::string>& categories() const { return categories_; }
  int num_tags() const;

  LinkTag tag(int index) const;
  int index_of(const LinkTag& tag) const;

  /// Throws ValidationError for unknown names.
  int category_index(std::string_view name) const;
  const std::string& category_name(int index) const;

  /// JSON string form: "KIND" in SS mode, "Category_KIND" in SSC mode.
  std::string tag_string(const LinkTag& tag) const;
  LinkTag parse_tag(std::string_view text) const;

  /// Stable identity of the scheme; checkpoints carry it.
  std::string fingerprint() const;

  friend bool operator==(const LabelScheme&, const LabelScheme&) = default;

 private:
  TaskMode mode_ = TaskMode::SS;
  std::vector<std::string> categories_;
};

std::vector<LinkTag> tag_table(const LabelScheme& scheme);

/// Per-shot link tags for a partition of [0, n_shots).
std::vector<LinkTag> encode(const std::vector<SceneAnnotation>& scenes, int n_shots,
                            const LabelScheme& scheme);

/// Inverse of encode. Throws GrammarError at the first illegal position.
std::vector<SceneAnnotation> decode(const std::vector<LinkTag>& tags, const LabelScheme& scheme);

bool is_legal_transition(const LabelScheme& scheme, const LinkTag& from, const LinkTag& to);
bool is_legal_start(const LinkTag& tag);
bool is_legal_end(const LinkTag& tag);

struct TransitionMask {
  int num_tags = 0;
  std::vector<std::uint8_t> allowed;  // row-major num_tags x num_tags
  std::vector<std::uint8_t> legal_start;
  std::vector<std::uint8_t> legal_end;

  bool is_allowed(int from, int to) const { return allowed[from * num_tags + to] != 0; }
  int count_allowed() const;
};

TransitionMask transition_mask(const LabelScheme& scheme);

/// Greedy left-to-right rewrite of an arbitrary tag sequence into a
/// grammatical one; the identity on grammatical input.
std::vector<LinkTag> repair(const std::vector<LinkTag>& tags, const LabelScheme& scheme);

std::vector<int> to_indices(const std::vector<LinkTag>& tags, const LabelScheme& scheme);
std::vector<LinkTag> from_indices(const std::vector<int>& indices, const LabelScheme& scheme);

/// Throws ValidationError unless the scenes partition [0, n_shots) in order.
void validate_partition(const std::vector<SceneAnnotation>& scenes, int n_shots);

}  // namespace osmsl
