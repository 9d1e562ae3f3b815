#pragma once

// Named-entity acquisition and matching: normalization, entity sets with
// configurable dedup keys, a gazetteer matcher, annotation ingestion and the
// source-containment test used by hallucination scoring.

#include "faithsel/corpus.hpp"

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faithsel::annotate {

class EntityType {
 public:
  enum class Kind { transport_line, location, organization, person, time, date, numeral,
                    schedule, other };

  EntityType() = default;
  EntityType(Kind kind) : kind_(kind) {}  // NOLINT(google-explicit-constructor)
  static EntityType other(std::string label) {
    EntityType t(Kind::other);
    t.label_ = std::move(label);
    return t;
  }
  /// Unknown names map to other(name); `known` reports which case applied.
  static EntityType parse(std::string_view name, bool* known = nullptr);

  Kind kind() const noexcept { return kind_; }
  std::string name() const;

  bool operator==(const EntityType&) const = default;

 private:
  Kind kind_ = Kind::other;
  std::string label_;
};

struct NormalizationConfig {
  bool accent_fold = false;

  bool operator==(const NormalizationConfig&) const = default;
};

enum class DedupKey { text, text_and_type };

struct MatchConfig {
  NormalizationConfig normalization;
  DedupKey key = DedupKey::text;
  /// Keep repeated mentions instead of collapsing them.
  bool multiset = false;

  bool operator==(const MatchConfig&) const = default;
};

/// Half-open range of code point indices into the annotated text.
struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const CharRange&) const = default;
};

struct EntitySpan {
  std::string surface;
  std::string normalized;
  EntityType type;
  std::optional<CharRange> range;

  bool operator==(const EntitySpan&) const = default;
};

/// NFC, case fold, optional accent folding, whitespace collapsed and trimmed.
std::string normalize_entity(std::string_view surface, const NormalizationConfig& config = {});

EntitySpan make_span(std::string surface, EntityType type, std::optional<CharRange> range,
                     const NormalizationConfig& config = {});

std::string entity_key(const EntitySpan& span, DedupKey key);

class EntitySet {
 public:
  explicit EntitySet(MatchConfig config = {}) : config_(config) {}

  /// Adds the span unless its key is already present (set mode).
  /// Returns whether the span was stored.
  bool insert(EntitySpan span);

  const std::vector<EntitySpan>& entities() const noexcept { return entities_; }
  std::size_t size() const noexcept { return entities_.size(); }
  bool empty() const noexcept { return entities_.empty(); }
  const MatchConfig& config() const noexcept { return config_; }

  std::string key_of(const EntitySpan& span) const { return entity_key(span, config_.key); }
  /// Number of stored entities per key (all ones in set mode).
  std::map<std::string, std::size_t> key_counts() const;

 private:
  MatchConfig config_;
  std::vector<EntitySpan> entities_;
  std::map<std::string, std::size_t> counts_;
};

/// Entities of `a` whose key (under `mode`) occurs in `b`. Raises
/// ConfigMismatch when the two sets were normalized differently.
EntitySet entity_intersection(const EntitySet& a, const EntitySet& b, DedupKey mode);

/// Literal phrases and regular expressions per entity type.
class Gazetteer {
 public:
  struct Entry {
    EntityType type;
    std::string pattern;
    bool is_regex = false;
  };

  Gazetteer();
  ~Gazetteer();
  Gazetteer(const Gazetteer&);
  Gazetteer& operator=(const Gazetteer&);
  Gazetteer(Gazetteer&&) noexcept;
  Gazetteer& operator=(Gazetteer&&) noexcept;

  /// `type<TAB>pattern<TAB>literal|regex` lines; '#' starts a comment line.
  static Gazetteer parse(std::istream& in);
  static Gazetteer load_file(const std::string& path);

  void add_literal(EntityType type, std::string phrase);
  void add_regex(EntityType type, std::string pattern);

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  struct Compiled;
  const Compiled& compiled() const { return *compiled_; }

 private:
  void add(Entry entry);

  std::vector<Entry> entries_;
  std::shared_ptr<Compiled> compiled_;
};

/// Longest-match-first, left-to-right, non-overlapping spans sorted by start.
/// Gazetteer patterns claim text first; built-in numeral/time/date patterns
/// only match what is left.
std::vector<EntitySpan> extract_spans(std::string_view text, const Gazetteer& gazetteer,
                                      const NormalizationConfig& config = {});
EntitySet extract_entities(std::string_view text, const Gazetteer& gazetteer,
                           const MatchConfig& config = {});

struct AnnotationSet {
  std::map<std::string, EntitySet> by_target;
  std::size_t unknown_type_count = 0;
};

/// `{"target_id": str, "entities": [{"surface", "type", "start"?, "end"?}]}`
/// lines. Every surface is re-normalized under `config`.
AnnotationSet load_entity_annotations(std::istream& in, const MatchConfig& config = {});
AnnotationSet load_entity_annotations_file(const std::string& path,
                                           const MatchConfig& config = {});
void save_entity_annotations(const std::map<std::string, EntitySet>& sets, std::ostream& out);

/// True iff `needle` occurs in `haystack` with no word character continuing
/// it on either side.
bool contains_at_token_boundary(std::string_view haystack, std::string_view needle);

/// Normalized, concatenated transcript text, built once per source and
/// queried for many entities.
class SourceIndex {
 public:
  SourceIndex(const corpus::Transcript& source, const NormalizationConfig& config = {});

  bool contains(const EntitySpan& entity) const;
  const std::string& normalized_text() const noexcept { return normalized_; }

 private:
  std::string normalized_;
};

bool entity_in_source(const EntitySpan& entity, const corpus::Transcript& source,
                      const NormalizationConfig& config = {});

}  // namespace faithsel::annotate
