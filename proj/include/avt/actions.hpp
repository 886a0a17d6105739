#pragma once

#include "avt/common.hpp"

#include <array>
#include <optional>
#include <string>

namespace avt {

/// Discrete translational action set: no-op, the six unit axes and the four in-plane diagonals.
class ActionTable {
 public:
  static constexpr int kSize = 11;

  static constexpr std::array<std::array<int, 3>, kSize> kSteps = {{
      {0, 0, 0},
      {1, 0, 0}, {-1, 0, 0},
      {0, 1, 0}, {0, -1, 0},
      {0, 0, 1}, {0, 0, -1},
      {1, 1, 0}, {1, -1, 0}, {-1, 1, 0}, {-1, -1, 0},
  }};

  static Vec3 step(int index) {
    if (index < 0 || index >= kSize) throw std::out_of_range("ActionTable: index out of range");
    const auto& s = kSteps[static_cast<std::size_t>(index)];
    return Vec3(s[0], s[1], s[2]);
  }

  static std::optional<int> index_of(const Vec3& step) {
    for (int i = 0; i < kSize; ++i) {
      if (ActionTable::step(i) == step) return i;
    }
    return std::nullopt;
  }

  static std::string label(int index) {
    const auto& s = kSteps.at(static_cast<std::size_t>(index));
    auto c = [](int v) { return v > 0 ? std::string("+") : v < 0 ? std::string("-") : std::string("0"); };
    return c(s[0]) + c(s[1]) + c(s[2]);
  }
};

}  // namespace avt
