#include "hlv/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "hlv/error.hpp"
#include "hlv/io.hpp"
#include "template_resources.hpp"

namespace hlv {

std::string_view to_string(PromptType type) noexcept {
  switch (type) {
    case PromptType::WithoutExplanations:
      return "without-explanations";
    case PromptType::WithExplanations:
      return "with-explanations";
    case PromptType::WithExplicitExplanations:
      return "with-explicit-explanations";
    case PromptType::AssistantMode:
      return "assistant";
    case PromptType::AssistantModeExplicit:
      return "assistant-explicit";
  }
  return "unknown";
}

PromptType parse_prompt_type(std::string_view name) {
  for (PromptType t : kAllPromptTypes) {
    if (to_string(t) == name) return t;
  }
  throw UsageError("unknown prompt type '" + std::string(name) + "'");
}

OptionMapping OptionMapping::from_labels(const std::array<NliLabel, 3>& labels) {
  std::array<bool, 3> seen{};
  for (NliLabel l : labels) {
    const auto i = index_of(l);
    if (i >= 3 || seen[i]) throw UsageError("option mapping is not a bijection");
    seen[i] = true;
  }
  return OptionMapping(labels);
}

OptionMapping OptionMapping::identity() noexcept {
  return OptionMapping({NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction});
}

std::size_t OptionMapping::letter_for(NliLabel label) const noexcept {
  for (std::size_t i = 0; i < 3; ++i) {
    if (labels_[i] == label) return i;
  }
  return 3;
}

std::string OptionMapping::code() const {
  std::string s;
  for (NliLabel l : labels_) s.push_back(static_cast<char>(std::toupper(label_letter(l))));
  return s;
}

OptionMapping OptionMapping::from_code(std::string_view code) {
  if (code.size() != 3) throw UsageError("option mapping code must have three letters");
  std::array<NliLabel, 3> labels{};
  for (std::size_t i = 0; i < 3; ++i) labels[i] = parse_label(code.substr(i, 1));
  return from_labels(labels);
}

std::vector<OptionMapping> option_mappings() {
  std::array<NliLabel, 3> labels = {NliLabel::Entailment, NliLabel::Neutral,
                                    NliLabel::Contradiction};
  std::vector<OptionMapping> out;
  do {
    out.push_back(OptionMapping::from_labels(labels));
  } while (std::next_permutation(labels.begin(), labels.end()));
  return out;
}

std::string_view to_string(ExplanationMode mode) noexcept {
  switch (mode) {
    case ExplanationMode::None:
      return "none";
    case ExplanationMode::Serial:
      return "serial";
    case ExplanationMode::Parallel:
      return "parallel";
    case ExplanationMode::KAtATime:
      return "k-at-a-time";
  }
  return "unknown";
}

ExplanationMode parse_explanation_mode(std::string_view name) {
  for (auto m : {ExplanationMode::None, ExplanationMode::Serial, ExplanationMode::Parallel,
                 ExplanationMode::KAtATime}) {
    if (to_string(m) == name) return m;
  }
  throw UsageError("unknown explanation mode '" + std::string(name) + "'");
}

namespace {

void ordered_selections(std::size_t m, std::size_t k, ExplanationBatch& current,
                        std::vector<bool>& used, std::vector<ExplanationBatch>& out) {
  if (current.size() == k) {
    out.push_back(current);
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (used[i]) continue;
    used[i] = true;
    current.push_back(i);
    ordered_selections(m, k, current, used, out);
    current.pop_back();
    used[i] = false;
  }
}

}  // namespace

std::vector<ExplanationBatch> explanation_batches(std::size_t m, std::size_t k,
                                                  ExplanationMode mode) {
  std::vector<ExplanationBatch> out;
  switch (mode) {
    case ExplanationMode::None:
      out.emplace_back();
      return out;
    case ExplanationMode::Serial: {
      if (m < 1) throw UsageError("serial mode needs at least one explanation");
      ExplanationBatch order(m);
      std::iota(order.begin(), order.end(), std::size_t{0});
      do {
        out.push_back(order);
      } while (std::next_permutation(order.begin(), order.end()));
      return out;
    }
    case ExplanationMode::Parallel:
      if (m < 1) throw UsageError("parallel mode needs at least one explanation");
      for (std::size_t i = 0; i < m; ++i) out.push_back({i});
      return out;
    case ExplanationMode::KAtATime: {
      if (k < 1 || k > m) {
        throw UsageError("batch size k=" + std::to_string(k) + " out of range for m=" +
                         std::to_string(m));
      }
      ExplanationBatch current;
      std::vector<bool> used(m, false);
      ordered_selections(m, k, current, used, out);
      return out;
    }
  }
  return out;
}

std::string_view to_string(ChatMessage::Role role) noexcept {
  return role == ChatMessage::Role::User ? "user" : "assistant";
}

std::string PromptText::canonical_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) {
    arr.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  return arr.dump();
}

std::string PromptText::digest() const { return sha256_hex(canonical_json()); }

std::vector<std::string> template_versions() {
  std::set<std::string> versions;
  for (const auto& t : detail::builtin_templates()) versions.emplace(t.version);
  return {versions.begin(), versions.end()};
}

namespace {

std::string_view template_text(std::string_view version, std::string_view name) {
  for (const auto& t : detail::builtin_templates()) {
    if (t.version == version && t.name == name) return t.text;
  }
  throw UsageError("no prompt template '" + std::string(name) + "' in version '" +
                   std::string(version) + "'");
}

std::string substitute(std::string_view tpl,
                       const std::vector<std::pair<std::string_view, std::string>>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const std::size_t open = tpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tpl.find('}', open);
    if (close == std::string_view::npos) break;
    const std::string_view key = tpl.substr(open + 1, close - open - 1);
    auto it = std::find_if(values.begin(), values.end(),
                           [&](const auto& kv) { return kv.first == key; });
    out.append(tpl.substr(pos, open - pos));
    if (it != values.end()) {
      out += it->second;
    } else {
      out.append(tpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(tpl.substr(std::min(pos, tpl.size())));
  return out;
}

std::string option_block(const OptionMapping& mapping) {
  std::string s;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i > 0) s += '\n';
    s += kOptionLetters[i];
    s += ". ";
    s += label_name(mapping.label_for(i));
  }
  s += '.';
  return s;
}

std::string comment_block(std::span<const ExplanationAnnotation> batch, bool explicit_labels) {
  std::string s;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (i > 0) s += '\n';
    s += "Comment " + std::to_string(i + 1) + ": " + batch[i].text;
    if (explicit_labels) {
      s += ", so I choose ";
      s += label_name(batch[i].label);
    }
  }
  return s;
}

}  // namespace

PromptText render_prompt(const NliItem& item, std::span<const ExplanationAnnotation> batch,
                         const OptionMapping& mapping, PromptType type,
                         std::string_view template_version) {
  if (uses_explanations(type) == batch.empty()) {
    throw UsageError(std::string("prompt type '") + std::string(to_string(type)) +
                     (batch.empty() ? "' needs explanations" : "' takes no explanations"));
  }
  std::string_view name = "without_explanations";
  if (is_assistant(type)) {
    name = "assistant";
  } else if (uses_explanations(type)) {
    name = "with_explanations";
  }
  const std::vector<std::pair<std::string_view, std::string>> values = {
      {"premise", item.premise},
      {"hypothesis", item.hypothesis},
      {"comments", comment_block(batch, is_explicit(type))},
      {"options", option_block(mapping)},
  };

  PromptText prompt;
  const std::string_view tpl = template_text(template_version, name);
  std::size_t pos = 0;
  ChatMessage* current = nullptr;
  std::string body;
  auto flush = [&] {
    if (current == nullptr) return;
    while (!body.empty() && body.back() == '\n') body.pop_back();
    current->content = substitute(body, values);
    body.clear();
  };
  while (pos < tpl.size()) {
    std::size_t end = tpl.find('\n', pos);
    if (end == std::string_view::npos) end = tpl.size();
    const std::string_view line = tpl.substr(pos, end - pos);
    if (line == "@user" || line == "@assistant") {
      flush();
      prompt.messages.push_back(
          {line == "@user" ? ChatMessage::Role::User : ChatMessage::Role::Assistant, {}});
      current = &prompt.messages.back();
    } else {
      body.append(line);
      body += '\n';
    }
    pos = end + 1;
  }
  flush();
  if (prompt.messages.empty() || prompt.messages.front().role != ChatMessage::Role::User) {
    throw UsageError("prompt template '" + std::string(name) + "' must start with a user message");
  }
  return prompt;
}

}  // namespace hlv
