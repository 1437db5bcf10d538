#pragma once

#include <span>
#include <string_view>

namespace hlv::detail {

struct TemplateResource {
  std::string_view version;
  std::string_view name;
  std::string_view text;
};

/// Generated at build time from resources/templates/<version>/<name>.txt.
std::span<const TemplateResource> builtin_templates() noexcept;

}  // namespace hlv::detail
