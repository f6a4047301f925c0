#include "facmdp/base.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace facmdp {

std::string bits_to_string(const Bits& b) {
  std::string s(b.size(), '0');
  for (size_t i = 0; i < b.size(); ++i)
    if (b[i]) s[i] = '1';
  return s;
}

Bits bits_from_string(const std::string& s) {
  Bits b(s.size(), 0);
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '1')
      b[i] = 1;
    else if (s[i] != '0')
      fail("bit string must contain only 0/1: \"" + s + "\"");
  }
  return b;
}

BigUint::BigUint(uint64_t v) {
  if (v == 0) limbs_ = {0};
  while (v > 0) {
    limbs_.push_back(static_cast<uint32_t>(v % 1000000000ull));
    v /= 1000000000ull;
  }
}

void BigUint::trim() {
  while (limbs_.size() > 1 && limbs_.back() == 0) limbs_.pop_back();
}

BigUint BigUint::from_decimal(const std::string& s) {
  BigUint r;
  for (char c : s) {
    require(c >= '0' && c <= '9', "BigUint::from_decimal: bad digit");
    r.mul_small(10);
    r.add(BigUint(static_cast<uint64_t>(c - '0')));
  }
  return r;
}

BigUint& BigUint::add(const BigUint& o) {
  size_t n = std::max(limbs_.size(), o.limbs_.size());
  limbs_.resize(n, 0);
  uint64_t carry = 0;
  for (size_t i = 0; i < n; ++i) {
    uint64_t v = carry + limbs_[i] + (i < o.limbs_.size() ? o.limbs_[i] : 0u);
    limbs_[i] = static_cast<uint32_t>(v % 1000000000ull);
    carry = v / 1000000000ull;
  }
  if (carry) limbs_.push_back(static_cast<uint32_t>(carry));
  return *this;
}

BigUint& BigUint::mul_small(uint64_t m) {
  if (m == 0 || is_zero()) {
    limbs_ = {0};
    return *this;
  }
  // split m to keep intermediates below 2^64
  if (m >= 1000000000ull) {
    uint64_t hi = m / 1000000000ull, lo = m % 1000000000ull;
    BigUint shifted = *this;
    shifted.mul_small(hi);
    shifted.limbs_.insert(shifted.limbs_.begin(), 0);
    mul_small(lo);
    add(shifted);
    return *this;
  }
  uint64_t carry = 0;
  for (auto& l : limbs_) {
    uint64_t v = static_cast<uint64_t>(l) * m + carry;
    l = static_cast<uint32_t>(v % 1000000000ull);
    carry = v / 1000000000ull;
  }
  while (carry) {
    limbs_.push_back(static_cast<uint32_t>(carry % 1000000000ull));
    carry /= 1000000000ull;
  }
  return *this;
}

BigUint BigUint::mul(const BigUint& o) const {
  BigUint acc;
  for (size_t i = o.limbs_.size(); i-- > 0;) {
    acc.mul_small(1000000000ull);
    BigUint term = *this;
    term.mul_small(o.limbs_[i]);
    acc.add(term);
  }
  acc.trim();
  return acc;
}

BigUint BigUint::pow2(unsigned e) {
  BigUint r(1);
  for (unsigned i = 0; i < e; ++i) r.mul_small(2);
  return r;
}

BigUint BigUint::binomial(unsigned n, unsigned k) {
  if (k > n) return BigUint(0);
  if (k > n - k) k = n - k;
  // running product stays integral: multiply before each divide by a
  // prefix-factorial step using exact small division
  BigUint num(1);
  uint64_t denom = 1;
  std::vector<uint32_t> dummy;
  // compute n! / ((n-k)! k!) as repeated integer mul with exact division
  // via progressive gcd-free scheme: product of (n-k+i)/i is integral at
  // each step, so divide the big number by i exactly.
  auto div_small_exact = [](BigUint& b, uint64_t d) {
    uint64_t rem = 0;
    for (size_t i = b.limbs_.size(); i-- > 0;) {
      uint64_t cur = rem * 1000000000ull + b.limbs_[i];
      b.limbs_[i] = static_cast<uint32_t>(cur / d);
      rem = cur % d;
    }
    require(rem == 0, "binomial: inexact division");
    b.trim();
  };
  (void)denom;
  (void)dummy;
  for (unsigned i = 1; i <= k; ++i) {
    num.mul_small(n - k + i);
    div_small_exact(num, i);
  }
  return num;
}

std::string BigUint::to_string() const {
  std::string s = std::to_string(limbs_.back());
  char buf[16];
  for (size_t i = limbs_.size() - 1; i-- > 0;) {
    std::snprintf(buf, sizeof buf, "%09u", limbs_[i]);
    s += buf;
  }
  return s;
}

RngStream::RngStream(uint64_t seed, const std::string& stream_name, uint64_t index) {
  uint64_t h = 1469598103934665603ull;
  for (char c : stream_name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(h),    static_cast<uint32_t>(h >> 32),
                    static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
  eng_.seed(seq);
}

uint64_t RngStream::next_below(uint64_t n) {
  require(n > 0, "next_below: empty range");
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v;
  do {
    v = eng_();
  } while (v >= limit);
  return v % n;
}

size_t RngStream::sample_cdf(const std::vector<double>& probs) {
  double u = next_double();
  double acc = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

std::vector<double> RngStream::dirichlet_uniform(size_t n) {
  std::vector<double> v(n);
  double sum = 0;
  for (auto& x : v) {
    double u = next_double();
    if (u < 1e-300) u = 1e-300;
    x = -std::log(u);
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  size_t nw = std::min<size_t>(static_cast<size_t>(threads), n);
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::vector<std::exception_ptr> errs(nw);
  for (size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = w; i < n; i += nw) fn(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) err = e;
  if (err) std::rethrow_exception(err);
}

int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace facmdp
