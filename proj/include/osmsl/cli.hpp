#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace osmsl::cli {

/// Entry point of the `osmsl` tool. args[0] is the program name. Returns the
/// process exit code; messages go to `out` / `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// SVG line chart of normalized losses, one polyline per series.
std::string render_curves_svg(const std::vector<std::pair<std::string, std::vector<std::pair<int, double>>>>& series);

}  // namespace osmsl::cli
