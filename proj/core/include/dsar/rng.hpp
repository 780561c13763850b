#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dsar {

// Deterministic random source. All draw routines are written out explicitly
// (Box-Muller etc.) instead of going through std:: distributions, whose
// sequences are implementation-defined; the mt19937_64 engine itself is
// fully specified, so output is reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream for replication `rep` of a run seeded with `seed`; a pure
  // function of (seed, rep) so worker scheduling cannot affect results.
  static Rng for_replication(std::uint64_t seed, std::uint64_t rep) {
    std::uint64_t s = seed;
    s ^= 0x9E3779B97F4A7C15ull + (rep << 6) + (rep >> 2) + rep * 0xBF58476D1CE4E5B9ull;
    s = splitmix(s ^ rep);
    return Rng(s);
  }

  // Uniform on (0,1), never exactly 0 or 1.
  double uniform() {
    const double scale = 1.0 / 9007199254740992.0;  // 2^-53
    std::uint64_t bits = engine_() >> 11;
    double u = (static_cast<double>(bits) + 0.5) * scale;
    return u;
  }

  double normal() {
    // Box-Muller, discarding the paired value to keep draws stateless.
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double student_t(int df) {
    double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < df; ++i) {
      double n = normal();
      chi2 += n * n;
    }
    return z / std::sqrt(chi2 / static_cast<double>(df));
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace dsar
