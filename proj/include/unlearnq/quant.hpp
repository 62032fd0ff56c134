#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace unlearnq::quant {

// n-bit signed symmetric fake quantization. The representable grid is
// { s*k : k integer, -2^(n-1) <= k <= 2^(n-1)-1 }.
struct QuantSpec {
  int bits = 4;
  double scale = 1.0;
  bool is_signed = true;  // only signed quantization is implemented

  double level_min() const { return -static_cast<double>(std::int64_t{1} << (bits - 1)); }
  double level_max() const { return static_cast<double>((std::int64_t{1} << (bits - 1)) - 1); }

  void validate() const;  // throws std::invalid_argument
};

// 1 where the pre-quantization value fell inside the clamp range; same shape
// as the quantized array. Drives the straight-through backward pass.
using SteMask = std::vector<std::uint8_t>;

struct Quantized {
  std::vector<double> values;
  SteMask mask;
};

// Ties round to the nearest even integer. Fixed tie rule keeps runs
// deterministic and the rounding bias-free.
double round_half_to_even(double v);

// x_q = s * round(clamp(x/s, -2^(n-1), 2^(n-1)-1)); mask true iff x/s was
// inside the clamp range. Rejects non-finite inputs, naming the offending
// index.
Quantized quantize(std::span<const double> x, const QuantSpec& spec);

// Single-value helper: grid snap without mask bookkeeping.
double quantize_value(double x, const QuantSpec& spec);

// upstream where the mask is set, zero elsewhere. Rejects shape mismatch.
std::vector<double> ste_backward(std::span<const double> upstream, const SteMask& mask);

// One-shot min-max calibration: s = max|x| / (2^(n-1)-1). An all-zero tensor
// gets scale 1 so the spec stays valid.
double calibrate_scale(std::span<const double> x, int bits);

}  // namespace unlearnq::quant
