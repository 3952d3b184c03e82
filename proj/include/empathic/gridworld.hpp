#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "empathic/random.hpp"

namespace empathic {

/// Row 0 is the top of the grid, column 0 the left edge.
struct Position {
  int row = 0;
  int col = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

struct GridSpec {
  int width = 8;
  int height = 8;

  GridSpec() = default;
  GridSpec(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("GridSpec: width and height must be positive");
  }

  bool contains(Position p) const { return p.row >= 0 && p.row < height && p.col >= 0 && p.col < width; }
  int cells() const { return width * height; }
  Position at(int index) const { return {index / width, index % width}; }
  int index_of(Position p) const { return p.row * width + p.col; }
};

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, NoOp = 4 };

inline constexpr int kNumActions = 5;
inline constexpr int kFieldSide = 5;
inline constexpr int kFieldSize = kFieldSide * kFieldSide;
inline constexpr int kFieldCenter = kFieldSize / 2;

inline constexpr std::array<Action, kNumActions> kAllActions = {Action::Up, Action::Down, Action::Left,
                                                                Action::Right, Action::NoOp};

inline Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) throw std::out_of_range("action index out of range");
  return static_cast<Action>(index);
}

inline int to_index(Action a) { return static_cast<int>(a); }

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::NoOp: return "noop";
  }
  return "?";
}

/// Flattened 5x5 window, row-major, observer at index 12.
using PerceptiveField = std::array<double, kFieldSize>;

/// Adjacent cell in the action's direction; moves off the grid stay put.
inline Position apply_move(const GridSpec& spec, Position pos, Action action) {
  Position next = pos;
  switch (action) {
    case Action::Up: --next.row; break;
    case Action::Down: ++next.row; break;
    case Action::Left: --next.col; break;
    case Action::Right: ++next.col; break;
    case Action::NoOp: break;
  }
  return spec.contains(next) ? next : pos;
}

/// values[5*dr + dc] = cell_value(center + (dr-2, dc-2)); cells off the grid read 0.
template <class CellValueFn>
PerceptiveField encode_field(const GridSpec& spec, CellValueFn&& cell_value, Position center) {
  PerceptiveField field{};
  for (int dr = 0; dr < kFieldSide; ++dr) {
    for (int dc = 0; dc < kFieldSide; ++dc) {
      const Position p{center.row + dr - 2, center.col + dc - 2};
      field[static_cast<std::size_t>(kFieldSide * dr + dc)] = spec.contains(p) ? cell_value(p) : 0.0;
    }
  }
  return field;
}

/// A world as imagined by the learner after trading places with the other agent.
template <class World>
struct Imagined {
  World world;
  Position center;
};

/// Worlds with a learner and at most one counterpart expose
///   bool has_counterpart() const;
///   Position counterpart_position() const;
///   World with_agents_swapped() const;   // exchanges the two agents' situations
template <class World>
concept SwappableWorld = requires(const World& w) {
  { w.has_counterpart() } -> std::convertible_to<bool>;
  { w.counterpart_position() } -> std::convertible_to<Position>;
  { w.with_agents_swapped() } -> std::convertible_to<World>;
};

/// Learner and counterpart exchange situations; the imagined observation is
/// centred on the counterpart's actual cell. Works regardless of whether the
/// counterpart is inside the learner's window. Empty when there is no
/// counterpart.
template <SwappableWorld World>
std::optional<Imagined<World>> swap_perspective(const World& world) {
  if (!world.has_counterpart()) return std::nullopt;
  return Imagined<World>{world.with_agents_swapped(), world.counterpart_position()};
}

/// Uniform action, used by the non-learning agents.
inline Action random_walk(Rng& rng) {
  return static_cast<Action>(rng.uniform_index(kNumActions));
}

/// Two distinct uniformly random cells, first then second.
inline std::array<Position, 2> place_two(const GridSpec& spec, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(spec.cells());
  if (n < 2) throw std::invalid_argument("placement needs at least two cells");
  const int first = static_cast<int>(rng.uniform_index(n));
  int second = static_cast<int>(rng.uniform_index(n - 1));
  if (second >= first) ++second;
  return {spec.at(first), spec.at(second)};
}

}  // namespace empathic
