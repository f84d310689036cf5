#pragma once

#include <cstdint>
#include <random>

namespace inpaint_forge {

/// Seeded generator used for every stochastic choice outside the networks
/// (region placement, data order, phantom geometry).
///
/// The engine is mt19937_64, whose output sequence is fixed by the standard;
/// bounded draws use rejection sampling rather than std distributions so that
/// results do not depend on the standard library implementation.
/// A generator has a single owner. Parallel consumers take independent
/// streams through split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next() { return engine_(); }

  /// Uniform integer on the closed interval [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Uniform real on [lo, hi).
  double uniform(double lo, double hi);

  /// Independent generator for `stream`, derived from this generator's seed
  /// (not its current position), so splitting never perturbs the parent.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace inpaint_forge
