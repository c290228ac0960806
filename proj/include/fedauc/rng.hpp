#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedauc {

// Tags for the last component of a seed path. Values are part of the
// reproducibility contract; never renumber.
enum class Purpose : std::uint64_t {
  kPartition = 1,
  kFlip = 2,
  kSynthetic = 3,
  kInit = 4,
  kPlan = 5,
  kLocalSample = 6,
  kPassiveDraw = 7,
  kBufferShuffle = 8,
  kBootstrap = 9,
  kSplit = 10,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// A deterministic random stream identified by a seed path. Forking appends a
// component to the path; the child depends only on the parent's path, never on
// how many draws the parent has made, so streams can be created in any order
// (or on any thread) without changing their output.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed)
      : key_(detail::splitmix64(master_seed ^ 0x5eedf00dcafef00dULL)), engine_(key_) {}

  RngStream fork(std::uint64_t component) const {
    return RngStream(Key{detail::splitmix64(key_ ^ detail::splitmix64(component + 0x632be59bd9b4e019ULL))});
  }
  RngStream fork(Purpose purpose) const { return fork(static_cast<std::uint64_t>(purpose)); }

  RngStream fork(std::initializer_list<std::uint64_t> path) const {
    RngStream s = *this;
    for (auto c : path) s = s.fork(c);
    return s;
  }

  // (master, stage, epoch, group, client, purpose)
  static RngStream at(std::uint64_t master, std::uint64_t stage, std::uint64_t epoch,
                      std::uint64_t group, std::uint64_t client, Purpose purpose) {
    return RngStream(master).fork({stage, epoch, group, client}).fork(purpose);
  }

  std::uint64_t key() const { return key_; }
  std::mt19937_64& engine() { return engine_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Unbiased uniform index in [0, n); n must be positive.
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  // In-place Fisher-Yates using index(); std::shuffle's draw pattern is
  // implementation-defined.
  template <typename Range>
  void shuffle(Range& r) {
    const std::size_t n = r.size();
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = index(i);
      using std::swap;
      swap(r[i - 1], r[j]);
    }
  }

 private:
  struct Key {
    std::uint64_t value;
  };
  explicit RngStream(Key k) : key_(k.value), engine_(key_) {}

  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace fedauc
