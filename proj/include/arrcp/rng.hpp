#pragma once

#include <cstdint>
#include <random>

namespace arrcp {

// Deterministic generator with substream addressing: the stream for
// replicate b depends only on (seed, b), so bootstrap aggregation is
// invariant to execution order and thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform();            // U(0,1), open interval
  double normal();             // N(0,1) via inverse CDF, one uniform per draw
  long poisson(double mean);

  std::uint64_t next_u64();

 private:
  std::mt19937_64 gen_;
};

// Standard normal quantile function (Acklam's rational approximation with
// one Halley refinement); also used for qq plot data.
double normal_quantile(double p);

std::uint64_t mix64(std::uint64_t x);

}  // namespace arrcp
