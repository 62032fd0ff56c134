#pragma once

#include <filesystem>

#include "unlearnq/net.hpp"

namespace unlearnq::net {

// Flat binary model container, documented field order (all little-endian):
//   magic "UQNETCK1" (8 bytes)
//   u32 width_count, u32 widths[width_count]
//   u8 quantize_weights, u8 quantize_activations, u32 bits
//   f64 weight_scales[layers], f64 act_scales[layers]  (zero when unused)
//   per layer: f64 weights (row-major, out x in), f64 bias (out)
// Layers are named layer0..layerN-1 on load.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const NetConfig& cfg);

struct Checkpoint {
  ParameterSet params;
  NetConfig cfg;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace unlearnq::net
