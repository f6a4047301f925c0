#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace facmdp {

// Bit vectors are the common currency for sub-states, actions and binary
// feature values. Element values are always 0 or 1.
using Bits = std::vector<uint8_t>;

struct Error : std::runtime_error {
  explicit Error(const std::string& m) : std::runtime_error(m) {}
};

enum class Sense : uint8_t { LE, GE, EQ };

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

std::string bits_to_string(const Bits& b);
Bits bits_from_string(const std::string& s);

// Lexicographic order on bit strings, first element most significant.
// Used for all deterministic tie-breaks.
inline bool lex_less(const Bits& a, const Bits& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Packs up to 64 bits into a table key; position 0 of `vals` is the
// least significant bit of the key.
inline uint64_t pack_bits(const Bits& vals) {
  if (vals.size() > 64) fail("pack_bits: more than 64 bits");
  uint64_t k = 0;
  for (size_t i = 0; i < vals.size(); ++i)
    if (vals[i]) k |= (uint64_t{1} << i);
  return k;
}

inline Bits unpack_bits(uint64_t key, size_t n) {
  Bits b(n, 0);
  for (size_t i = 0; i < n; ++i) b[i] = (key >> i) & 1u;
  return b;
}

// Mixed-radix counter over `radix[i]` digits. Digit 0 is the most
// significant position: the enumeration order is lexicographic on the
// digit tuple. Returns false once the counter wraps past the last tuple.
inline bool next_mixed_radix(std::vector<int>& digits, const std::vector<int>& radix) {
  for (int i = static_cast<int>(digits.size()) - 1; i >= 0; --i) {
    if (++digits[i] < radix[i]) return true;
    digits[i] = 0;
  }
  return false;
}

// Rank of a digit tuple in the enumeration order above.
inline size_t mixed_radix_rank(const std::vector<int>& digits, const std::vector<int>& radix) {
  size_t r = 0;
  for (size_t i = 0; i < digits.size(); ++i) r = r * static_cast<size_t>(radix[i]) + static_cast<size_t>(digits[i]);
  return r;
}

// Unsigned big integer, enough for parameter counting on huge flat spaces.
class BigUint {
 public:
  BigUint() : limbs_{0} {}
  explicit BigUint(uint64_t v);

  static BigUint from_decimal(const std::string& s);

  BigUint& add(const BigUint& o);
  BigUint& mul_small(uint64_t m);
  BigUint mul(const BigUint& o) const;
  static BigUint pow2(unsigned e);
  static BigUint binomial(unsigned n, unsigned k);

  bool is_zero() const { return limbs_.size() == 1 && limbs_[0] == 0; }
  std::string to_string() const;

  friend bool operator==(const BigUint& a, const BigUint& b) { return a.limbs_ == b.limbs_; }

 private:
  // little-endian limbs, base 1e9
  std::vector<uint32_t> limbs_;
  void trim();
};

// Deterministic stream family: one master seed fans out into named
// substreams so that, say, the simulator and the cut heuristic never
// share state and results do not depend on call interleaving.
class RngStream {
 public:
  RngStream(uint64_t seed, const std::string& stream_name, uint64_t index = 0);

  uint64_t next_u64() { return eng_(); }
  // uniform in [0,1)
  double next_double() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  // uniform integer in [0, n)
  uint64_t next_below(uint64_t n);
  // index into a cumulative-weight draw
  size_t sample_cdf(const std::vector<double>& probs);
  std::vector<double> dirichlet_uniform(size_t n);
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[next_below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

// Runs fn(i) for i in [0, n) on `threads` workers. Results must be
// written to pre-sized slots so the reduction is order-independent.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

int hardware_threads();

std::string format_double(double v);

}  // namespace facmdp
