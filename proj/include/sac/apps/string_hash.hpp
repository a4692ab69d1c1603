#pragma once

// Polynomial string hash over one long string:
//
//   h(s) = s₁·x^(n−1) + s₂·x^(n−2) + … + sₙ  (mod p)
//
// The string is split into chunks of g characters; one reader per chunk
// hashes its characters (read_array over the per-character cells), and
// combiners merge left/right as  h = h_left·x^len_right + h_right  (mod p),
// with the power computed by fast modular exponentiation inside the
// combiner body.  Chunk lengths are fixed by (n, g), never by values, so
// the powers are safe to derive from captured constants.
//
// Changing one character re-executes exactly one chunk reader and its
// combiner chain: 1 + log2(n/g) readers on power-of-two shapes.

#include <cstdint>
#include <string_view>
#include <vector>

#include "sac/apps/common.hpp"

namespace sac::apps {

class StringHashApp {
 public:
  static constexpr const char* kName = "hash";
  static constexpr uint64_t kDefaultBase = 256;
  static constexpr uint64_t kDefaultPrime = (1ull << 61) - 1;

  StringHashApp(size_t n, uint64_t seed, size_t granularity = 64,
                uint64_t x = kDefaultBase, uint64_t p = kDefaultPrime)
      : n_(n),
        g_(granularity == 0 ? 1 : granularity),
        x_(x),
        p_(p),
        chars_(rng_stream(seed, 5)),
        picks_(rng_stream(seed, 6)) {
    model_.resize(n_);
    in_.resize(n_);
    for (size_t i = 0; i < n_; ++i) {
      model_[i] = static_cast<uint8_t>('a' + draw_below(chars_, 26));
      in_[i]->write(model_[i]);
    }
  }

  // Explicit initial contents; mutations still come from the seed.
  StringHashApp(std::string_view text, uint64_t seed, size_t granularity = 64,
                uint64_t x = kDefaultBase, uint64_t p = kDefaultPrime)
      : n_(text.size()),
        g_(granularity == 0 ? 1 : granularity),
        x_(x),
        p_(p),
        chars_(rng_stream(seed, 5)),
        picks_(rng_stream(seed, 6)) {
    model_.assign(text.begin(), text.end());
    in_.resize(n_);
    for (size_t i = 0; i < n_; ++i) in_[i]->write(model_[i]);
  }

  StringHashApp(const StringHashApp&) = delete;
  StringHashApp& operator=(const StringHashApp&) = delete;

  void build(Scheduler& sched) {
    comp_ = run(
        [&] {
          const size_t chunks = (n_ + g_ - 1) / g_;
          if (chunks == 0) {
            write(hash_.get(), uint64_t{0});
            return;
          }
          auto hs = alloc_array<uint64_t>(chunks);
          parfor(0, chunks, [this, &hs](size_t c) {
            const size_t lo = c * g_;
            const size_t hi = std::min(n_, lo + g_);
            read_array(in_.slice(lo, hi),
                       [this, h = hs[c]](std::span<const uint8_t> cs) {
                         work(cs.size());
                         uint64_t v = 0;
                         for (uint8_t ch : cs)
                           v = addmod(mulmod(v, x_, p_), ch % p_, p_);
                         write(h, v);
                       });
          });
          combine(hs, 0, chunks, hash_.get());
        },
        sched);
  }

  void mutate(size_t k) {
    for (size_t i : sample_distinct(picks_, n_, k)) {
      uint8_t c = static_cast<uint8_t>('a' + draw_below(picks_, 26));
      while (c == model_[i])
        c = static_cast<uint8_t>('a' + draw_below(picks_, 26));
      model_[i] = c;
      write(in_[i], c);
    }
  }

  bool verify() const { return hash_->value() == oracle_hash(); }

  uint64_t baseline_pass() const { return oracle_hash(); }
  uint64_t output_digest() const { return hash_->value(); }

  uint64_t output() const { return hash_->value(); }
  Computation& comp() { return comp_; }

 private:
  // Direct left-to-right Horner evaluation; independent of the chunking.
  uint64_t oracle_hash() const {
    uint64_t v = 0;
    for (uint8_t ch : model_) v = addmod(mulmod(v, x_, p_), ch % p_, p_);
    return v;
  }

  size_t chunk_len(size_t c) const {
    return std::min(n_, (c + 1) * g_) - c * g_;
  }
  size_t range_len(size_t lo, size_t hi) const {
    size_t total = 0;
    for (size_t c = lo; c < hi; ++c) total += chunk_len(c);
    return total;
  }

  // Combining tree over the chunk hashes, pair reads at the bottom.
  void combine(const std::vector<Modifiable<uint64_t>*>& hs, size_t lo,
               size_t hi, Modifiable<uint64_t>* dest) {
    const size_t m = hi - lo;
    if (m == 1) {
      read(hs[lo], [dest](uint64_t v) { write(dest, v); });
      return;
    }
    const size_t mid = lo + m / 2;
    Modifiable<uint64_t>*l, *r;
    if (m == 2) {
      l = hs[lo];
      r = hs[lo + 1];
    } else {
      l = alloc<uint64_t>();
      r = alloc<uint64_t>();
      par([&, l] { combine(hs, lo, mid, l); },
          [&, r] { combine(hs, mid, hi, r); });
    }
    read(std::tuple{l, r},
         [this, dest, rlen = range_len(mid, hi)](uint64_t a, uint64_t b) {
           work(1);
           write(dest, addmod(mulmod(a, powmod(x_, rlen, p_), p_), b, p_));
         });
  }

  size_t n_, g_;
  uint64_t x_, p_;
  std::mt19937_64 chars_, picks_;
  std::vector<uint8_t> model_;
  InputArray<uint8_t> in_;
  ModPtr<uint64_t> hash_ = make_input<uint64_t>();
  Computation comp_;
};

}  // namespace sac::apps
