#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ctr/error.hpp"
#include "ctr/strings.hpp"

namespace ctr {

inline constexpr int kNumIntFeatures = 13;
inline constexpr int kNumCatFeatures = 26;
inline constexpr int kNumFields = kNumIntFeatures + kNumCatFeatures;

// Sentinel token produced for missing values; always encodes to the
// per-field OOV index and never enters a vocabulary.
inline constexpr std::string_view kMissingToken = "<na>";

// One ad impression in Criteo text form: optional click label, 13 integer
// slots, 26 categorical slots. Empty input fields are represented as absent.
struct RawRecord {
  std::optional<int> label;
  std::array<std::optional<std::int64_t>, kNumIntFeatures> int_feats;
  std::array<std::optional<std::string>, kNumCatFeatures> cat_feats;

  bool operator==(const RawRecord&) const = default;
};

// Parses one tab-separated line: 40 fields when labeled, 39 otherwise.
// `line_no` is only used in error messages (1-based; 0 = unknown).
inline RawRecord parse_line(std::string_view line, bool has_label,
                            std::size_t line_no = 0) {
  const auto where = [line_no]() {
    return line_no == 0 ? std::string()
                        : " at line " + std::to_string(line_no);
  };

  const auto fields = split(strip_cr(line), '\t');
  const std::size_t expected =
      static_cast<std::size_t>(kNumFields) + (has_label ? 1 : 0);
  if (fields.size() != expected) {
    throw ParseError("malformed record" + where() + ": expected " +
                     std::to_string(expected) + " fields, got " +
                     std::to_string(fields.size()));
  }

  RawRecord rec;
  std::size_t col = 0;
  if (has_label) {
    const std::string_view f = fields[col++];
    if (f != "0" && f != "1") {
      throw ParseError("bad label" + where() + ": '" + std::string(f) + "'");
    }
    rec.label = (f == "1") ? 1 : 0;
  }
  for (int i = 0; i < kNumIntFeatures; ++i) {
    const std::string_view f = fields[col++];
    if (f.empty()) continue;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || v < 0) {
      throw ParseError("bad integer feature" + where() + " in slot " +
                       std::to_string(i) + ": '" + std::string(f) + "'");
    }
    rec.int_feats[static_cast<std::size_t>(i)] = v;
  }
  for (int i = 0; i < kNumCatFeatures; ++i) {
    const std::string_view f = fields[col++];
    if (f.empty()) continue;
    rec.cat_feats[static_cast<std::size_t>(i)] = std::string(f);
  }
  return rec;
}

// Inverse of parse_line for well-formed records.
inline std::string format_line(const RawRecord& rec, bool with_label) {
  std::string out;
  if (with_label) {
    out += rec.label ? std::to_string(*rec.label) : std::string();
    out += '\t';
  }
  for (int i = 0; i < kNumIntFeatures; ++i) {
    const auto& v = rec.int_feats[static_cast<std::size_t>(i)];
    if (v) out += std::to_string(*v);
    out += '\t';
  }
  for (int i = 0; i < kNumCatFeatures; ++i) {
    const auto& v = rec.cat_feats[static_cast<std::size_t>(i)];
    if (v) out += *v;
    if (i + 1 < kNumCatFeatures) out += '\t';
  }
  return out;
}

// Discretizes a numeric feature into a categorical token:
// missing -> "<na>", v <= 2 -> "v", v > 2 -> floor((ln v)^2).
inline std::string transform_numeric(std::optional<std::int64_t> v) {
  if (!v) return std::string(kMissingToken);
  if (*v <= 2) return std::to_string(*v);
  const double lv = std::log(static_cast<double>(*v));
  return std::to_string(static_cast<std::int64_t>(std::floor(lv * lv)));
}

// Token for field f (0..38) after numeric discretization.
inline std::string field_token(const RawRecord& rec, int f) {
  if (f < kNumIntFeatures) {
    return transform_numeric(rec.int_feats[static_cast<std::size_t>(f)]);
  }
  const auto& c = rec.cat_feats[static_cast<std::size_t>(f - kNumIntFeatures)];
  return c ? *c : std::string(kMissingToken);
}

}  // namespace ctr
