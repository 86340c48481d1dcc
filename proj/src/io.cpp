#include "h2tf/io.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace h2tf {

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Float64: return 8;
  }
  throw FormatError(fmt::format("dtype: unknown code {}", static_cast<unsigned>(dtype)));
}

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[offset + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing '{}'", path));
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor3& x, DType dtype) {
  const std::size_t width = dtype_size(dtype);
  const auto [h, w, b] = x.shape();
  if (h > UINT32_MAX || w > UINT32_MAX || b > UINT32_MAX) throw FormatError("dims exceed u32");
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderBytes + x.size() * width);
  for (char c : kTensorMagic) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint16_t>(out, kTensorFormatVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(dtype));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b));
  for (double v : x.data()) {
    if (dtype == DType::Float32) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

TensorFile decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTensorHeaderBytes) {
    throw LengthError(fmt::format("header: need {} bytes, file has {}", kTensorHeaderBytes, bytes.size()));
  }
  for (std::size_t i = 0; i < kTensorMagic.size(); ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(kTensorMagic[i])) throw FormatError("magic: not an HT3 file");
  }
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kTensorFormatVersion) throw FormatError(fmt::format("version: unsupported {}", version));
  const auto code = get_le<std::uint16_t>(bytes, 6);
  if (code != 1 && code != 2) throw FormatError(fmt::format("dtype: unknown code {}", code));
  const auto dtype = static_cast<DType>(code);
  const Shape3 shape{get_le<std::uint32_t>(bytes, 8), get_le<std::uint32_t>(bytes, 12),
                     get_le<std::uint32_t>(bytes, 16)};
  if (shape.h == 0 || shape.w == 0 || shape.b == 0) throw FormatError("dims: zero extent " + to_string(shape));
  const std::size_t width = dtype_size(dtype);
  const std::size_t expected = shape.size() * width;
  const std::size_t payload = bytes.size() - kTensorHeaderBytes;
  if (payload != expected) {
    throw LengthError(fmt::format("payload: expected {} bytes for {}, found {}", expected, to_string(shape), payload));
  }
  std::vector<double> values(shape.size());
  for (std::size_t n = 0; n < values.size(); ++n) {
    const std::size_t off = kTensorHeaderBytes + n * width;
    values[n] = dtype == DType::Float32
                    ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, off)))
                    : std::bit_cast<double>(get_le<std::uint64_t>(bytes, off));
  }
  return {Tensor3(shape, std::move(values)), dtype};
}

void write_tensor(const std::string& path, const Tensor3& x, DType dtype) {
  write_all(path, encode_tensor(x, dtype));
}

TensorFile read_tensor_file(const std::string& path) {
  const auto bytes = read_all(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path, e.what()));
  } catch (const LengthError& e) {
    throw LengthError(fmt::format("{}: {}", path, e.what()));
  }
}

Tensor3 read_tensor(const std::string& path) { return read_tensor_file(path).tensor; }

std::vector<std::uint8_t> band_to_gray(const Tensor3& x, std::size_t k, BandExport* info) {
  if (k >= x.bands()) throw RangeError(fmt::format("band {} out of range for {} bands", k, x.bands()));
  auto s = x.slice_span(k);
  const auto [lo, hi] = std::ranges::minmax(s);
  BandExport meta{lo, hi, !(hi > lo)};
  std::vector<std::uint8_t> px(s.size(), 128);
  if (!meta.constant) {
    const double span = hi - lo;
    for (std::size_t n = 0; n < s.size(); ++n) {
      px[n] = static_cast<std::uint8_t>(std::lround(255.0 * (s[n] - lo) / span));
    }
  }
  if (info != nullptr) *info = meta;
  return px;
}

BandExport export_band(const Tensor3& x, std::size_t k, const std::string& path) {
  BandExport meta;
  const auto px = band_to_gray(x, k, &meta);
  std::vector<std::uint8_t> bytes;
  const std::string header = fmt::format("P5\n{} {}\n255\n", x.cols(), x.rows());
  bytes.insert(bytes.end(), header.begin(), header.end());
  bytes.insert(bytes.end(), px.begin(), px.end());
  write_all(path, bytes);
  const std::string note = meta.constant ? " constant=1 (written as mid-gray)" : "";
  const std::string side = fmt::format("band={} min={} max={}{}\n", k, meta.min, meta.max, note);
  write_all(path + ".txt", std::span(reinterpret_cast<const std::uint8_t*>(side.data()), side.size()));
  return meta;
}

KeyValue to_keyvalue(const ModelConfig& cfg) {
  KeyValue kv;
  kv.set("layers", cfg.layers);
  kv.set("transforms", cfg.transforms);
  kv.set("ranks", fmt::format("{}", fmt::join(cfg.ranks, ",")));
  kv.set("activation", to_string(cfg.activation.kind));
  kv.set("slope", cfg.activation.slope);
  kv.set("init_scale", cfg.init_scale);
  kv.set("transform_noise", cfg.transform_noise);
  kv.set("seed", cfg.seed);
  return kv;
}

ModelConfig model_config_from(const KeyValue& kv) {
  ModelConfig cfg;
  cfg.layers = kv.get_u64("layers", cfg.layers);
  cfg.transforms = kv.get_u64("transforms", cfg.transforms);
  cfg.ranks.clear();
  std::stringstream ss(kv.get("ranks"));
  std::string item;
  while (std::getline(ss, item, ',')) cfg.ranks.push_back(std::stoul(item));
  cfg.activation.kind = parse_activation_kind(kv.get_string("activation", "leaky_relu"));
  cfg.activation.slope = kv.get_double("slope", cfg.activation.slope);
  cfg.init_scale = kv.get_double("init_scale", cfg.init_scale);
  cfg.transform_noise = kv.get_double("transform_noise", cfg.transform_noise);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  return cfg;
}

void save_params(const std::string& dir, const H2TFParams& params, const ModelConfig& cfg) {
  params.validate();
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  for (std::size_t d = 0; d < params.factors.size(); ++d) {
    write_tensor((base / fmt::format("W{}.ht3", d + 1)).string(), params.factors[d]);
  }
  for (std::size_t p = 0; p < params.transforms.size(); ++p) {
    const auto& hm = params.transforms[p];
    write_tensor((base / fmt::format("H{}.ht3", p + 1)).string(),
                 Tensor3(Shape3{hm.rows(), hm.cols(), 1}, std::vector<double>(hm.data().begin(), hm.data().end())));
  }
  KeyValue kv = to_keyvalue(cfg);
  kv.set("shape", fmt::format("{},{},{}", params.shape.h, params.shape.w, params.shape.b));
  std::string trainable;
  for (std::size_t p = 0; p < params.transform_trainable.size(); ++p) {
    trainable += (p ? "," : "") + std::string(params.transform_trainable[p] ? "1" : "0");
  }
  kv.set("transform_trainable", trainable);
  kv.save((base / "params.manifest").string());
}

LoadedParams load_params(const std::string& dir) {
  const std::filesystem::path base(dir);
  const KeyValue kv = KeyValue::load((base / "params.manifest").string());
  LoadedParams out{{}, model_config_from(kv)};
  auto& p = out.params;
  {
    std::stringstream ss(kv.get("shape"));
    std::string item;
    std::vector<std::size_t> dims;
    while (std::getline(ss, item, ',')) dims.push_back(std::stoul(item));
    if (dims.size() != 3) throw FormatError("shape: expected h,w,b");
    p.shape = {dims[0], dims[1], dims[2]};
  }
  p.activation = out.config.activation;
  for (std::size_t d = 1; d <= out.config.layers; ++d) {
    p.factors.push_back(read_tensor((base / fmt::format("W{}.ht3", d)).string()));
  }
  const std::string trainable = kv.get_string("transform_trainable", "");
  for (std::size_t q = 1; q <= out.config.transforms; ++q) {
    const Tensor3 t = read_tensor((base / fmt::format("H{}.ht3", q)).string());
    p.transforms.emplace_back(t.rows(), t.cols(), std::vector<double>(t.data().begin(), t.data().end()));
    const std::size_t flag = 2 * (q - 1);
    p.transform_trainable.push_back(flag >= trainable.size() || trainable[flag] == '1');
  }
  p.validate();
  return out;
}

}  // namespace h2tf
