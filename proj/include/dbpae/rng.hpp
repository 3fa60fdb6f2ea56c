#pragma once

#include <cstdint>
#include <vector>

namespace dbpae {

// PCG32 (XSH-RR 64/32) with Box-Muller normals. Fixed algorithms so that a
// given (seed, stream) yields the same draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();

  // 53-bit double in [0, 1)
  double next_double();

  double uniform(double lo, double hi);

  // standard normal; Box-Muller, the sine mate of each pair is cached
  double normal();

  // unbiased integer in [0, bound)
  std::uint32_t next_below(std::uint32_t bound);

  // Fisher-Yates
  void shuffle(std::vector<std::size_t>& v);

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dbpae
