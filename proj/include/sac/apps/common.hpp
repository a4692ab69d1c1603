#pragma once

// Shared pieces for the benchmark applications: deterministic random
// streams, the divide-and-conquer reduction skeleton, modular arithmetic
// for the rolling hash, and the edit-distance kernel.
//
// Every app draws all of its randomness (inputs, update batches, coin
// flips) from a seed through these streams before anything runs, so a
// re-executed reader can never observe different random choices.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "sac/engine.hpp"

namespace sac::apps {

// One seed, many decorrelated purposes: salt picks the stream.
inline std::mt19937_64 rng_stream(uint64_t seed, uint64_t salt) {
  return std::mt19937_64(detail::mix64(seed) ^ detail::mix64(~salt));
}

// Bounded draw done by hand so recorded expectations do not depend on a
// particular standard library's distribution algorithm.
inline uint64_t draw_below(std::mt19937_64& rng, uint64_t bound) {
  return rng() % bound;
}

// k distinct indices in [0, n), order deterministic: partial Fisher-Yates.
inline std::vector<size_t> sample_distinct(std::mt19937_64& rng, size_t n,
                                           size_t k) {
  if (k > n) k = n;
  std::vector<size_t> pool(n);
  for (size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<size_t> out;
  out.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + draw_below(rng, n - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

// Balanced combining tree over already-written cells: pairs at the leaves,
// an allocation + par per internal split, one combiner read at each level.
// Changing one input re-executes its pair reader plus log2(n) combiners.
template <class T, class Op>
void reduce_tree(std::span<Modifiable<T>* const> xs, Modifiable<T>* dest,
                 Op op) {
  const size_t m = xs.size();
  if (m == 0) throw ContractViolation("reduce over an empty span");
  if (m == 1) {
    read(xs[0], [dest](const T& a) { write(dest, a); });
    return;
  }
  if (m == 2) {
    read(std::tuple{xs[0], xs[1]},
         [dest, op](const T& a, const T& b) { write(dest, op(a, b)); });
    return;
  }
  auto* l = alloc<T>();
  auto* r = alloc<T>();
  const size_t mid = m / 2;
  par([=] { reduce_tree(xs.first(mid), l, op); },
      [=] { reduce_tree(xs.subspan(mid), r, op); });
  read(std::tuple{l, r},
       [dest, op](const T& a, const T& b) { write(dest, op(a, b)); });
}

// --- modular arithmetic (string hash) --------------------------------------

inline uint64_t mulmod(uint64_t a, uint64_t b, uint64_t p) {
  return static_cast<uint64_t>(static_cast<__uint128_t>(a) * b % p);
}

inline uint64_t addmod(uint64_t a, uint64_t b, uint64_t p) {
  return (a + b) % p;  // both < p < 2^63, no overflow
}

inline uint64_t powmod(uint64_t base, uint64_t exp, uint64_t p) {
  uint64_t acc = 1 % p;
  base %= p;
  while (exp != 0) {
    if (exp & 1) acc = mulmod(acc, base, p);
    base = mulmod(base, base, p);
    exp >>= 1;
  }
  return acc;
}

// --- edit distance (spellcheck) ---------------------------------------------

// Classic two-row Levenshtein DP, O(|a|·|b|) time, O(|b|) space.
inline size_t edit_distance(const std::string& a, const std::string& b) {
  const size_t m = b.size();
  std::vector<size_t> row(m + 1);
  for (size_t j = 0; j <= m; ++j) row[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    size_t diag = row[0];
    row[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      const size_t up = row[j];
      const size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[m];
}

inline std::string random_string(std::mt19937_64& rng, size_t len) {
  std::string s(len, 'a');
  for (char& c : s) c = static_cast<char>('a' + draw_below(rng, 26));
  return s;
}

// Order-sensitive value digest used by baseline passes; the compiler cannot
// drop the oracle computation when its digest is returned.
inline uint64_t digest_mix(uint64_t h, uint64_t v) {
  return detail::mix64(h ^ detail::mix64(v));
}

}  // namespace sac::apps
