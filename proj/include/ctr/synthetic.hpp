#pragma once

#include <cmath>
#include <array>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ctr/data/record.hpp"
#include "ctr/num/functions.hpp"
#include "ctr/rng.hpp"

namespace ctr {

// Deterministic generators of Criteo-format TSV for demos and tests.
//
// The main generator emits rows whose click probability is a logistic
// function of per-token effects plus a few pairwise token interactions, so
// the task has both first-order and strictly second-order signal, a
// negative-heavy class balance and a meaningful Bayes ceiling. All effects
// are hashed from (field, token), never stored.

namespace synth_detail {

// Deterministic standard-normal-ish effect for a (field, token) pair.
inline double hashed_normal(std::uint64_t generator_seed, int field,
                            const std::string& token, std::uint64_t salt) {
  std::uint64_t h = splitmix64(generator_seed ^ salt);
  h = splitmix64(h ^ static_cast<std::uint64_t>(field) * 0x9e37ULL);
  for (const char ch : token) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(ch)));
  }
  // sum of 4 uniforms, centered and scaled: close enough to normal here
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    h = splitmix64(h);
    acc += static_cast<double>(h >> 11) * 0x1.0p-53;
  }
  return (acc - 2.0) * 1.7320508075688772;
}

inline int hashed_sign(std::uint64_t generator_seed, int field,
                       const std::string& token, std::uint64_t salt) {
  return hashed_normal(generator_seed, field, token, salt) >= 0.0 ? 1 : -1;
}

inline std::string hex_token(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(8, '0');
  for (int i = 0; i < 8; ++i) {
    out[static_cast<std::size_t>(i)] = digits[(h >> (4 * i)) & 0xf];
  }
  return out;
}

}  // namespace synth_detail

struct SynthProfile {
  // per-field first-order effect scale; 0 makes a pure-noise field
  std::array<double, kNumFields> field_scale{};
  // categorical vocabulary sizes (fields 13..38)
  std::array<std::size_t, kNumCatFeatures> vocab_size{};
  std::array<double, kNumFields> missing_prob{};
  // pairwise sign interactions between two categorical fields
  struct Pair {
    int field_a;
    int field_b;
    double strength;
  };
  std::vector<Pair> pairs;
  // realized positive rate; the base logit is solved per corpus so the
  // rate holds for any seed despite non-centered token effects
  double positive_rate = 0.26;
  // upper end of the sqrt-log scale integer draws live on; smaller values
  // concentrate the post-transform tokens
  double int_u_range = 1.85;
};

// The fixed profile used throughout: 5 informative integer fields, 9
// informative categorical fields, 3 sign-structured field pairs, the rest
// noise; roughly a quarter of labels positive.
inline SynthProfile default_synth_profile() {
  SynthProfile p;
  for (int f = 0; f < kNumFields; ++f) {
    p.field_scale[static_cast<std::size_t>(f)] = 0.0;
    p.missing_prob[static_cast<std::size_t>(f)] = 0.0;
  }
  // integer fields: a few informative, varied missingness
  const int informative_ints[] = {0, 2, 5, 6, 10};
  for (int f : informative_ints) {
    p.field_scale[static_cast<std::size_t>(f)] = 0.40;
  }
  p.missing_prob[1] = 0.25;
  p.missing_prob[2] = 0.10;
  p.missing_prob[7] = 0.40;
  p.missing_prob[10] = 0.05;

  // categorical fields; informative ones get small vocabularies so their
  // token effects are estimable from a 10k sample
  const std::size_t sizes[kNumCatFeatures] = {37, 23, 11, 41, 7,  29, 17, 53,
                                              13, 9,  31, 19, 43, 8,  25, 15,
                                              11, 47, 21, 6,  33, 12, 27, 10,
                                              35, 14};
  for (int c = 0; c < kNumCatFeatures; ++c) {
    p.vocab_size[static_cast<std::size_t>(c)] = sizes[c];
  }
  const int informative_cats[] = {13, 15, 16, 19, 21, 24, 27, 31, 36};
  const std::size_t informative_sizes[] = {7, 9, 11, 8, 6, 10, 7, 9, 8};
  for (std::size_t i = 0; i < std::size(informative_cats); ++i) {
    const int f = informative_cats[i];
    p.field_scale[static_cast<std::size_t>(f)] = 0.45;
    p.vocab_size[static_cast<std::size_t>(f - kNumIntFeatures)] =
        informative_sizes[i];
  }
  p.missing_prob[14] = 0.30;
  p.missing_prob[20] = 0.15;
  p.missing_prob[33] = 0.45;

  p.pairs = {{15, 24, 1.1}, {19, 31, 1.0}, {16, 36, 0.9}};
  return p;
}

// Raw (base-free) logit of a row given its post-transform tokens.
inline double synth_row_logit(std::uint64_t seed, const SynthProfile& profile,
                              const std::array<std::string, kNumFields>& tokens) {
  using namespace synth_detail;
  double logit = 0.0;
  for (int f = 0; f < kNumFields; ++f) {
    const auto fs = static_cast<std::size_t>(f);
    if (tokens[fs] == kMissingToken) continue;
    const double scale = profile.field_scale[fs];
    if (scale > 0.0) {
      logit += scale * hashed_normal(seed, f, tokens[fs], 0xA11CE);
    }
  }
  for (const auto& pair : profile.pairs) {
    const auto a = static_cast<std::size_t>(pair.field_a);
    const auto b = static_cast<std::size_t>(pair.field_b);
    if (tokens[a] == kMissingToken || tokens[b] == kMissingToken) continue;
    logit += pair.strength *
             hashed_sign(seed, pair.field_a, tokens[a], 0xBEEF) *
             hashed_sign(seed, pair.field_b, tokens[b], 0xBEEF);
  }
  return logit;
}

// Writes `rows` labeled Criteo-format lines. Deterministic in (rows, seed).
// Two passes: rows are drawn first, then a shared base logit is solved by
// bisection so the realized mean click probability hits the profile's
// positive rate, then labels are sampled.
inline void write_synthetic_criteo(std::ostream& out, std::size_t rows,
                                   std::uint64_t seed,
                                   const SynthProfile& profile =
                                       default_synth_profile()) {
  using namespace synth_detail;
  Rng rng = Rng(seed).derive(0xC0FFEE);
  Rng label_rng = Rng(seed).derive(0x1ABE1);

  std::vector<std::array<std::string, kNumFields>> written(rows);
  std::vector<double> raw_logits(rows);

  for (std::size_t row = 0; row < rows; ++row) {
    std::array<std::string, kNumFields> tokens;  // post-transform view

    for (int f = 0; f < kNumIntFeatures; ++f) {
      const auto fs = static_cast<std::size_t>(f);
      if (rng.uniform() < profile.missing_prob[fs]) {
        tokens[fs] = std::string(kMissingToken);
        written[row][fs] = "";
        continue;
      }
      // log-uniform-ish counts; the log-square transform bins them coarsely
      const double u = rng.uniform(0.0, profile.int_u_range);
      const auto value = static_cast<std::int64_t>(std::floor(std::exp(u * u)));
      written[row][fs] = std::to_string(value);
      tokens[fs] = transform_numeric(value);
    }
    for (int c = 0; c < kNumCatFeatures; ++c) {
      const int f = kNumIntFeatures + c;
      const auto fs = static_cast<std::size_t>(f);
      if (rng.uniform() < profile.missing_prob[fs]) {
        tokens[fs] = std::string(kMissingToken);
        written[row][fs] = "";
        continue;
      }
      // mild Zipf over the field vocabulary
      const auto v = static_cast<double>(
          profile.vocab_size[static_cast<std::size_t>(c)]);
      const double z = rng.uniform();
      const auto rank = static_cast<std::uint64_t>(v * z * z);
      written[row][fs] = hex_token(
          splitmix64(seed ^ (static_cast<std::uint64_t>(f) << 20) ^ rank));
      tokens[fs] = written[row][fs];
    }
    raw_logits[row] = synth_row_logit(seed, profile, tokens);
  }

  double lo = -20.0, hi = 20.0;
  for (int iter = 0; iter < 60; ++iter) {
    const double base = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double raw : raw_logits) mean += sigmoid(raw + base);
    mean /= static_cast<double>(rows);
    (mean < profile.positive_rate ? lo : hi) = base;
  }
  const double base = 0.5 * (lo + hi);

  for (std::size_t row = 0; row < rows; ++row) {
    const int label =
        label_rng.uniform() < sigmoid(raw_logits[row] + base) ? 1 : 0;
    out << label;
    for (int f = 0; f < kNumFields; ++f) {
      out << '\t' << written[row][static_cast<std::size_t>(f)];
    }
    out << '\n';
  }
}

inline std::string synthetic_criteo_tsv(std::size_t rows, std::uint64_t seed) {
  std::ostringstream out;
  write_synthetic_criteo(out, rows, seed);
  return out.str();
}

// Labels are the XOR of two binary categorical fields: pure second-order
// signal that a first-order model cannot separate. The remaining fields
// carry label-independent noise tokens.
inline void write_xor_tsv(std::ostream& out, std::size_t rows,
                          std::uint64_t seed) {
  Rng rng = Rng(seed).derive(0xF00D);
  for (std::size_t row = 0; row < rows; ++row) {
    const int a = static_cast<int>(rng.below(2));
    const int b = static_cast<int>(rng.below(2));
    const int label = a ^ b;
    out << label;
    for (int f = 0; f < kNumIntFeatures; ++f) {
      out << '\t' << (1 + rng.below(5));
    }
    out << '\t' << (a ? "aaaa1111" : "aaaa0000");
    out << '\t' << (b ? "bbbb1111" : "bbbb0000");
    for (int c = 2; c < kNumCatFeatures; ++c) {
      out << '\t'
          << synth_detail::hex_token(splitmix64(
                 seed ^ (static_cast<std::uint64_t>(c) << 24) ^ rng.below(5)));
    }
    out << '\n';
  }
}

inline std::string xor_tsv(std::size_t rows, std::uint64_t seed) {
  std::ostringstream out;
  write_xor_tsv(out, rows, seed);
  return out.str();
}

}  // namespace ctr
