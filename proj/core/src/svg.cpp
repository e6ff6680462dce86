#include "lmd/svg.hpp"

#include <array>
#include <sstream>
#include <string_view>

namespace lmd {

namespace {

constexpr std::array<std::string_view, 10> kPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_layout_svg(const Layout& layout) {
  const int w = layout.canvas.width;
  const int h = layout.canvas.height;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  os << "  <title>" << xml_escape(layout.background_prompt) << "</title>\n";
  os << "  <g class=\"background\" fill=\"#f4f4f4\" stroke=\"#cccccc\"><polygon points=\"0,0 " << w
     << ",0 " << w << ',' << h << " 0," << h << "\"/></g>\n";
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    const auto& obj = layout.objects[i];
    const std::string_view color = kPalette[i % kPalette.size()];
    const std::string label = xml_escape(obj.description);
    os << "  <g class=\"object\" data-index=\"" << i << "\">\n";
    os << "    <rect x=\"" << obj.box.x << "\" y=\"" << obj.box.y << "\" width=\"" << obj.box.w
       << "\" height=\"" << obj.box.h << "\" fill=\"" << color << "\" fill-opacity=\"0.25\" stroke=\""
       << color << "\" stroke-width=\"3\"/>\n";
    os << "    <text x=\"" << obj.box.x + 4 << "\" y=\"" << obj.box.y + 18
       << "\" font-family=\"sans-serif\" font-size=\"16\" fill=\"" << color << "\">" << label
       << "</text>\n";
    os << "  </g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace lmd
