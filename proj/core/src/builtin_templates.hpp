#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace opmodel::detail {

/// (file name, contents) for every template shipped in core/templates.
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_template_files();

}  // namespace opmodel::detail
