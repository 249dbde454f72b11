#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "zkinfer/errors.hpp"
#include "zkinfer/field.hpp"
#include "zkinfer/tensor.hpp"

namespace zkinfer {

// Fixed-point parameters: scale alpha = 2^s, quotient bit-width nu, and
// range-check bit-width kappa.
struct QuantConfig {
  std::uint32_t s = 16;
  std::uint32_t nu = 32;
  std::uint32_t kappa = 32;

  u64 alpha() const { return u64{1} << s; }

  // Largest representable magnitude under the kappa budget.
  i64 kappa_budget() const { return static_cast<i64>((u64{1} << (kappa - 1)) - 1); }

  void validate(const Field& field) const {
    if (s < 1 || s >= 62) fail(ErrorKind::Config, "scale exponent s must be in [1, 61]");
    if (kappa < 2 || kappa > 62) fail(ErrorKind::Config, "kappa must be in [2, 62]");
    if (nu < 2 || nu > 62) fail(ErrorKind::Config, "nu must be in [2, 62]");
    if (kappa > nu) fail(ErrorKind::Config, "kappa must not exceed nu");
    if (s + nu >= 63 || (u128{1} << (s + nu)) >= ((field.modulus() - 1) >> 1))
      fail(ErrorKind::Config, "alpha * 2^nu must stay below (p-1)/2 to avoid wraparound");
    if (kappa >= 63 || (u128{1} << kappa) > field.modulus())
      fail(ErrorKind::Config, "2^kappa must not exceed the field modulus");
  }
};

// Integer tensor at scale alpha = 2^scale_exponent; every entry fits the
// signed kappa budget of the config it was produced under.
struct QuantizedTensor {
  std::vector<i64> data;
  Shape shape;
  std::uint32_t scale_exponent = 0;

  std::int64_t num_elements() const { return shape_num_elements(shape); }
};

// z -> floor(alpha * z), elementwise. True floor, so negative values may
// undershoot by one ulp of the fixed-point grid.
inline QuantizedTensor quantize(const FloatTensor& t, const QuantConfig& cfg) {
  QuantizedTensor out;
  out.shape = t.shape;
  out.scale_exponent = cfg.s;
  out.data.reserve(t.data.size());
  const double alpha = static_cast<double>(cfg.alpha());
  const i64 budget = cfg.kappa_budget();
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    double scaled = std::floor(alpha * t.data[i]);
    if (!(scaled >= static_cast<double>(-budget) && scaled <= static_cast<double>(budget)))
      fail(ErrorKind::Overflow, "quantize: element " + std::to_string(i) + " (value " +
                                    std::to_string(t.data[i]) + ") exceeds the kappa=" +
                                    std::to_string(cfg.kappa) + " budget at s=" + std::to_string(cfg.s));
    out.data.push_back(static_cast<i64>(scaled));
  }
  return out;
}

inline FloatTensor dequantize(const QuantizedTensor& t) {
  FloatTensor out;
  out.shape = t.shape;
  out.data.reserve(t.data.size());
  const double alpha = static_cast<double>(u64{1} << t.scale_exponent);
  for (i64 v : t.data) out.data.push_back(static_cast<double>(v) / alpha);
  return out;
}

// Result of rescaling a scale-alpha^2 product back to scale alpha via the
// translated quotient-remainder identity:
//   ab + alpha*2^(nu-1) = alpha*q_sharp + r,  0 <= r < alpha,
//   q = q_sharp - 2^(nu-1) = floor(ab / alpha).
struct Requant {
  i64 q = 0;
  i64 q_sharp = 0;
  i64 r = 0;
};

inline Requant requantize_int(i64 ab, const QuantConfig& cfg) {
  const i64 alpha = static_cast<i64>(cfg.alpha());
  const i64 translation = alpha << (cfg.nu - 1);  // alpha * 2^(nu-1)
  if (ab < -translation || ab > translation - 1)
    fail(ErrorKind::Range, "requantize: product " + std::to_string(ab) +
                               " outside the valid window [-alpha*2^(nu-1), alpha*2^(nu-1)-1]");
  i64 t = ab + translation;  // nonnegative by the window check
  Requant out;
  out.q_sharp = t / alpha;
  out.r = t % alpha;
  out.q = out.q_sharp - (i64{1} << (cfg.nu - 1));
  return out;
}

}  // namespace zkinfer
