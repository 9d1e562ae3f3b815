#include "faithsel/annotate.hpp"

#include "faithsel/error.hpp"
#include "faithsel/io.hpp"
#include "faithsel/text.hpp"

#include <fstream>
#include <ostream>

namespace faithsel::annotate {

using nlohmann::json;

namespace {

struct TypeName {
  EntityType::Kind kind;
  std::string_view name;
};

constexpr TypeName kTypeNames[] = {
    {EntityType::Kind::transport_line, "transport_line"},
    {EntityType::Kind::location, "location"},
    {EntityType::Kind::organization, "organization"},
    {EntityType::Kind::person, "person"},
    {EntityType::Kind::time, "time"},
    {EntityType::Kind::date, "date"},
    {EntityType::Kind::numeral, "numeral"},
    {EntityType::Kind::schedule, "schedule"},
};

}  // namespace

EntityType EntityType::parse(std::string_view name, bool* known) {
  for (const auto& t : kTypeNames) {
    if (t.name == name) {
      if (known) *known = true;
      return EntityType(t.kind);
    }
  }
  if (known) *known = false;
  return other(std::string(name));
}

std::string EntityType::name() const {
  for (const auto& t : kTypeNames) {
    if (t.kind == kind_) return std::string(t.name);
  }
  return label_.empty() ? "other" : label_;
}

std::string normalize_entity(std::string_view surface, const NormalizationConfig& config) {
  std::string s = text::casefold(text::nfc(surface));
  if (config.accent_fold) s = text::strip_accents(s);
  // case folding can leave a non-composed sequence behind
  return text::collapse_whitespace(text::nfc(s));
}

EntitySpan make_span(std::string surface, EntityType type, std::optional<CharRange> range,
                     const NormalizationConfig& config) {
  EntitySpan span;
  span.normalized = normalize_entity(surface, config);
  span.surface = std::move(surface);
  span.type = std::move(type);
  span.range = range;
  return span;
}

std::string entity_key(const EntitySpan& span, DedupKey key) {
  if (key == DedupKey::text) return span.normalized;
  return span.normalized + '\x1f' + span.type.name();
}

bool EntitySet::insert(EntitySpan span) {
  auto& count = counts_[key_of(span)];
  if (count > 0 && !config_.multiset) return false;
  ++count;
  entities_.push_back(std::move(span));
  return true;
}

std::map<std::string, std::size_t> EntitySet::key_counts() const { return counts_; }

EntitySet entity_intersection(const EntitySet& a, const EntitySet& b, DedupKey mode) {
  if (a.config().normalization != b.config().normalization ||
      a.config().multiset != b.config().multiset) {
    throw Error(Errc::config_mismatch, "entity sets were built under different configurations");
  }
  std::map<std::string, std::size_t> available;
  for (const auto& e : b.entities()) ++available[entity_key(e, mode)];

  MatchConfig cfg = a.config();
  cfg.key = mode;
  EntitySet out(cfg);
  for (const auto& e : a.entities()) {
    auto it = available.find(entity_key(e, mode));
    if (it == available.end() || it->second == 0) continue;
    if (out.insert(e)) --it->second;
  }
  return out;
}

AnnotationSet load_entity_annotations(std::istream& in, const MatchConfig& config) {
  AnnotationSet out;
  io::for_each_json_line(in, [&](const json& obj, std::size_t line) {
    std::string target = io::require_string(obj, "target_id", line);
    const json& entities = io::require(obj, "entities", line);
    if (!entities.is_array()) {
      throw Error(Errc::schema_violation, "'entities' must be an array", line);
    }
    EntitySet set(config);
    for (const auto& e : entities) {
      if (!e.is_object()) throw Error(Errc::schema_violation, "entity must be an object", line);
      std::string surface = io::require_string(e, "surface", line);
      bool known = true;
      EntityType type = EntityType::parse(io::require_string(e, "type", line), &known);
      if (!known) ++out.unknown_type_count;
      std::optional<CharRange> range;
      auto s = e.find("start");
      auto t = e.find("end");
      bool has_start = s != e.end() && !s->is_null();
      bool has_end = t != e.end() && !t->is_null();
      if (has_start != has_end) {
        throw Error(Errc::schema_violation, "'start' and 'end' must be given together", line);
      }
      if (has_start) {
        if (!s->is_number_unsigned() || !t->is_number_unsigned() ||
            s->get<std::size_t>() > t->get<std::size_t>()) {
          throw Error(Errc::schema_violation, "invalid entity offsets", line);
        }
        range = CharRange{s->get<std::size_t>(), t->get<std::size_t>()};
      }
      set.insert(make_span(std::move(surface), std::move(type), range, config.normalization));
    }
    if (!out.by_target.emplace(target, std::move(set)).second) {
      throw Error(Errc::duplicate_id, "target '" + target + "' annotated twice", line);
    }
  });
  return out;
}

AnnotationSet load_entity_annotations_file(const std::string& path, const MatchConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open annotations " + path);
  return load_entity_annotations(in, config);
}

void save_entity_annotations(const std::map<std::string, EntitySet>& sets, std::ostream& out) {
  for (const auto& [target, set] : sets) {
    json entities = json::array();
    for (const auto& e : set.entities()) {
      json item = {{"surface", e.surface}, {"type", e.type.name()}};
      if (e.range) {
        item["start"] = e.range->start;
        item["end"] = e.range->end;
      }
      entities.push_back(std::move(item));
    }
    out << json{{"target_id", target}, {"entities", std::move(entities)}}.dump() << '\n';
  }
}

bool contains_at_token_boundary(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  std::size_t probe = 0;
  const bool word_first = text::is_word_char(text::next_code_point(needle, probe));
  const bool word_last = text::is_word_char(text::previous_code_point(needle, needle.size()));
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    bool left_ok = pos == 0 || !word_first ||
                   !text::is_word_char(text::previous_code_point(haystack, pos));
    std::size_t after = end;
    bool right_ok = end == haystack.size() || !word_last ||
                    !text::is_word_char(text::next_code_point(haystack, after));
    if (left_ok && right_ok) return true;
  }
  return false;
}

SourceIndex::SourceIndex(const corpus::Transcript& source, const NormalizationConfig& config)
    : normalized_(normalize_entity(source.plain_text(), config)) {}

bool SourceIndex::contains(const EntitySpan& entity) const {
  return contains_at_token_boundary(normalized_, entity.normalized);
}

bool entity_in_source(const EntitySpan& entity, const corpus::Transcript& source,
                      const NormalizationConfig& config) {
  return SourceIndex(source, config).contains(entity);
}

}  // namespace faithsel::annotate
