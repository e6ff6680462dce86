#pragma once

#include <string>

#include "lmd/layout.hpp"

namespace lmd {

/// Canvas-sized SVG with one labeled rectangle per object. Colors follow the
/// object index, so equal layouts give byte-identical output.
[[nodiscard]] std::string render_layout_svg(const Layout& layout);

}  // namespace lmd
