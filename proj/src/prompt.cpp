#include "faithsel/error.hpp"
#include "faithsel/genharness.hpp"
#include "faithsel/prompt_template.hpp"

#include <array>

namespace faithsel::gen {

std::string_view default_prompt_template() { return kDefaultPromptTemplate; }

std::string build_augmentation_prompt(const PromptRequest& request) {
  const auto exemplar = corpus::parse_turn_markup(request.exemplar_dialog);
  const auto target = corpus::parse_turn_markup(request.target_dialog);
  if (exemplar.turns.empty()) {
    throw Error(Errc::malformed_markup, "exemplar dialog has no turns", 0);
  }
  if (target.turns.empty() && !request.allow_empty_target) {
    throw Error(Errc::malformed_markup, "target dialog has no turns", 0);
  }

  const std::array<std::pair<std::string_view, std::string>, 3> slots = {{
      {"{EXEMPLAR_DIALOG}", corpus::serialize_turn_markup(exemplar)},
      {"{EXEMPLAR_SUMMARY}", request.exemplar_summary},
      {"{TARGET_DIALOG}", corpus::serialize_turn_markup(target)},
  }};
  const std::string_view tmpl = request.template_text;
  std::size_t last = 0;
  for (const auto& [name, value] : slots) {
    auto at = tmpl.find(name);
    if (at == std::string_view::npos) {
      throw Error(Errc::invalid_argument, "prompt template lacks " + std::string(name));
    }
    if (at < last) {
      throw Error(Errc::invalid_argument,
                  "prompt template placeholders must appear as exemplar dialog, exemplar summary, "
                  "target dialog");
    }
    last = at;
  }

  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    for (const auto& [name, value] : slots) {
      if (tmpl.substr(i, name.size()) == name) {
        out += value;
        i += name.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

}  // namespace faithsel::gen
