#pragma once

// File formats.
//
// .ht3 tensor container, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "HT3\0"
//   4       2     version (u16, currently 1)
//   6       2     dtype code (u16): 1 = float32, 2 = float64
//   8       4     h (u32)
//   12      4     w (u32)
//   16      4     b (u32)
//   20      ...   h*w*b values, little-endian IEEE-754, frontal-slice-major
//                 (slice k contiguous, each slice row-major)
//
// Band export writes an 8-bit binary PGM (P5) plus a "<path>.txt" sidecar
// holding the min/max used for scaling.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "h2tf/keyvalue.hpp"
#include "h2tf/model.hpp"
#include "h2tf/tensor.hpp"

namespace h2tf {

enum class DType : std::uint16_t { Float32 = 1, Float64 = 2 };

inline constexpr std::array<char, 4> kTensorMagic{'H', 'T', '3', '\0'};
inline constexpr std::uint16_t kTensorFormatVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 20;

std::size_t dtype_size(DType dtype);

struct TensorFile {
  Tensor3 tensor;
  DType dtype = DType::Float64;
};

// Float32 output rounds each value to float; values that came from a
// float32 file survive the trip unchanged.
std::vector<std::uint8_t> encode_tensor(const Tensor3& x, DType dtype = DType::Float64);
TensorFile decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::string& path, const Tensor3& x, DType dtype = DType::Float64);
TensorFile read_tensor_file(const std::string& path);
Tensor3 read_tensor(const std::string& path);

struct BandExport {
  double min = 0.0;
  double max = 0.0;
  bool constant = false;  // constant bands are written as mid-gray (128)
};

// pixel = round(255 * (v - min) / (max - min)).
std::vector<std::uint8_t> band_to_gray(const Tensor3& x, std::size_t k, BandExport* info = nullptr);
BandExport export_band(const Tensor3& x, std::size_t k, const std::string& path);

// Parameter checkpoint: one .ht3 per factor (W<d>.ht3) and transform
// (H<p>.ht3, stored b x b x 1) next to a params.manifest listing the
// model configuration.
void save_params(const std::string& dir, const H2TFParams& params, const ModelConfig& cfg);
struct LoadedParams {
  H2TFParams params;
  ModelConfig config;
};
LoadedParams load_params(const std::string& dir);

KeyValue to_keyvalue(const ModelConfig& cfg);
ModelConfig model_config_from(const KeyValue& kv);

}  // namespace h2tf
