#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace switchdyn {

// SplitMix64 finalizer, used to derive decorrelated engine seeds from (master seed, stream index).
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

// Reproducible random stream identified by (master seed, stream index).
//
// The engine is std::mt19937_64, whose output sequence is fixed by the standard. Uniform, Gaussian and
// exponential variates are derived here from raw engine words (the std distributions are
// implementation-defined), so a given (seed, index) yields the same samples on every platform.
class RngStream {
public:
  static constexpr const char *algorithm = "mt19937_64/splitmix64/box-muller";

  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_(master_seed), index_(stream_index), engine_(derive_seed(master_seed, stream_index)) {}

  std::uint64_t master_seed() const noexcept { return master_; }
  std::uint64_t stream_index() const noexcept { return index_; }
  std::uint64_t engine_seed() const noexcept { return derive_seed(master_, index_); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open_low() noexcept { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  double gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open_low()));
    const double theta = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Exponential with the given rate; +infinity for rate 0.
  double exponential(double rate) noexcept {
    if (!(rate > 0.0)) {
      return std::numeric_limits<double>::infinity();
    }
    return -std::log(uniform_open_low()) / rate;
  }

private:
  std::uint64_t master_;
  std::uint64_t index_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace switchdyn
