#pragma once

#include <string_view>

namespace dircast {

// Market move direction. A flat close counts as up, everywhere: labels,
// SVM sign decisions, and MLP thresholding all share this tie rule.
enum class Direction { down = 0, up = 1 };

inline Direction direction_of_move(double from, double to) {
    return to >= from ? Direction::up : Direction::down;
}

inline std::string_view to_string(Direction d) {
    return d == Direction::up ? "up" : "down";
}

}  // namespace dircast
