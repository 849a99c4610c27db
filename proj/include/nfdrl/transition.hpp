#pragma once

#include <cstddef>

namespace nfdrl {

/// One replay record.
struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

}  // namespace nfdrl
