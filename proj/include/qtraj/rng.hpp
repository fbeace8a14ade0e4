#pragma once

#include <cstdint>
#include <random>

namespace qtraj {

/// Per-trajectory random source. Streams for different trajectory indices are
/// seeded independently, so results do not depend on the worker schedule.
struct RandomStream {
  std::mt19937_64 engine;
  std::normal_distribution<double> normal{0.0, 1.0};
  std::uniform_real_distribution<double> uniform{0.0, 1.0};

  RandomStream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32), 0x71u};
    engine.seed(seq);
  }

  double gaussian() { return normal(engine); }
  double unit() { return uniform(engine); }
};

}  // namespace qtraj
