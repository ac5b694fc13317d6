#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mep/common.hpp"

namespace mep {

// One labelled curve: mean line with a +-stddev band.
struct Series {
  std::string label;
  Vector x;
  Vector mean;
  Vector stddev;
};

struct Panel {
  std::string title;
  std::string ylabel;
  std::vector<Series> series;
};

// Panels side by side in a single static SVG file.
void write_svg(const std::filesystem::path& path, const std::vector<Panel>& panels);

}  // namespace mep
