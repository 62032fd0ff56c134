#include "unlearnq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace unlearnq::quant {

void QuantSpec::validate() const {
  if (bits < 2 || bits > 32)
    throw std::invalid_argument("QuantSpec: bits must be in [2, 32], got " + std::to_string(bits));
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("QuantSpec: scale must be a positive finite real, got " +
                                std::to_string(scale));
  if (!is_signed) throw std::invalid_argument("QuantSpec: only signed quantization is implemented");
}

double round_half_to_even(double v) {
  const double f = std::floor(v);
  const double diff = v - f;
  if (diff > 0.5) return f + 1.0;
  if (diff < 0.5) return f;
  // exact tie: pick the even neighbour
  return (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
}

Quantized quantize(std::span<const double> x, const QuantSpec& spec) {
  spec.validate();
  const double lo = spec.level_min();
  const double hi = spec.level_max();

  Quantized out;
  out.values.resize(x.size());
  out.mask.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw std::invalid_argument("quantize: non-finite input at index " + std::to_string(i));
    const double t = x[i] / spec.scale;
    out.mask[i] = (t >= lo && t <= hi) ? 1 : 0;
    out.values[i] = spec.scale * round_half_to_even(std::clamp(t, lo, hi));
  }
  return out;
}

double quantize_value(double x, const QuantSpec& spec) {
  if (!std::isfinite(x)) throw std::invalid_argument("quantize: non-finite input at index 0");
  const double t = std::clamp(x / spec.scale, spec.level_min(), spec.level_max());
  return spec.scale * round_half_to_even(t);
}

std::vector<double> ste_backward(std::span<const double> upstream, const SteMask& mask) {
  if (upstream.size() != mask.size())
    throw std::invalid_argument("ste_backward: shape mismatch, upstream " +
                                std::to_string(upstream.size()) + " vs mask " +
                                std::to_string(mask.size()));
  std::vector<double> out(upstream.size());
  for (std::size_t i = 0; i < upstream.size(); ++i) out[i] = mask[i] ? upstream[i] : 0.0;
  return out;
}

double calibrate_scale(std::span<const double> x, int bits) {
  double amax = 0.0;
  for (double v : x) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return 1.0;
  return amax / static_cast<double>((std::int64_t{1} << (bits - 1)) - 1);
}

}  // namespace unlearnq::quant
