#include "unlearnq/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace unlearnq::net {

namespace {

constexpr char kMagic[8] = {'U', 'Q', 'N', 'E', 'T', 'C', 'K', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const NetConfig& cfg) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, static_cast<std::uint32_t>(cfg.widths.size()));
  for (int w : cfg.widths) put_u32(os, static_cast<std::uint32_t>(w));
  os.put(cfg.quant.weights ? 1 : 0);
  os.put(cfg.quant.activations ? 1 : 0);
  put_u32(os, static_cast<std::uint32_t>(cfg.quant.bits));
  const std::size_t layer_n = cfg.layer_count();
  for (std::size_t l = 0; l < layer_n; ++l)
    put_f64(os, cfg.quant.weights ? cfg.quant.weight_scales[l] : 0.0);
  for (std::size_t l = 0; l < layer_n; ++l)
    put_f64(os, cfg.quant.activations ? cfg.quant.act_scales[l] : 0.0);
  for (const Layer& layer : params.layers) {
    for (double v : layer.weights.values()) put_f64(os, v);
    for (double v : layer.bias) put_f64(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());

  Checkpoint ck;
  const std::uint32_t nw = get_u32(is);
  if (nw < 2 || nw > 64) throw std::runtime_error("checkpoint: implausible width count");
  ck.cfg.widths.resize(nw);
  for (auto& w : ck.cfg.widths) w = static_cast<int>(get_u32(is));
  ck.cfg.quant.weights = is.get() != 0;
  ck.cfg.quant.activations = is.get() != 0;
  ck.cfg.quant.bits = static_cast<int>(get_u32(is));

  const std::size_t layer_n = ck.cfg.layer_count();
  std::vector<double> wscales(layer_n), ascales(layer_n);
  for (auto& s : wscales) s = get_f64(is);
  for (auto& s : ascales) s = get_f64(is);
  if (ck.cfg.quant.weights) ck.cfg.quant.weight_scales = wscales;
  if (ck.cfg.quant.activations) ck.cfg.quant.act_scales = ascales;

  for (std::size_t l = 0; l < layer_n; ++l) {
    Layer layer;
    layer.name = "layer" + std::to_string(l);
    const auto rows = static_cast<std::size_t>(ck.cfg.widths[l + 1]);
    const auto cols = static_cast<std::size_t>(ck.cfg.widths[l]);
    layer.weights = Matrix(rows, cols);
    for (double& v : layer.weights.values()) v = get_f64(is);
    layer.bias.resize(rows);
    for (double& v : layer.bias) v = get_f64(is);
    ck.params.layers.push_back(std::move(layer));
  }
  ck.cfg.validate();
  ck.params.validate();
  return ck;
}

}  // namespace unlearnq::net
