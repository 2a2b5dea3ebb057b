#include "rrtrack/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'R', 'E', '3', 'C', 'K', 'P', 'T', '1'};
constexpr const char* kConfigTensor = "meta.network_config";

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointTensor> tensors) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF) throw UsageError("tensor name too long: " + t.name.substr(0, 32));
    if (t.tensor.rank() > 0xFF) throw UsageError("tensor rank too large");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.tensor.rank()));
    for (auto d : t.tensor.dims()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.tensor.data()) {
      if (t.dtype == DType::f64) {
        put<double>(out, v);
      } else {
        put<float>(out, static_cast<float>(v));
      }
    }
  }
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

std::vector<CheckpointTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 + 4 + 8) throw FormatError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw FormatError("not a checkpoint (bad magic)");
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (fnv1a64(body) != stored) throw FormatError("checkpoint checksum mismatch");

  Reader r(body.subspan(8));
  const auto count = r.get<std::uint32_t>();
  std::vector<CheckpointTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    const auto len = r.get<std::uint16_t>();
    const auto name = r.take(len);
    t.name.assign(name.begin(), name.end());
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw FormatError("unknown dtype " + std::to_string(dtype) + " for '" + t.name + "'");
    t.dtype = static_cast<DType>(dtype);
    const auto rank = r.get<std::uint8_t>();
    Shape dims;
    for (int d = 0; d < rank; ++d) dims.push_back(r.get<std::uint32_t>());
    const std::size_t n = shape_size(dims);
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) {
      values[k] = t.dtype == DType::f64 ? r.get<double>() : static_cast<double>(r.get<float>());
    }
    t.tensor = Tensor::from(std::move(dims), std::move(values));
    out.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last tensor");
  return out;
}

void write_checkpoint(const std::filesystem::path& path, std::span<const CheckpointTensor> tensors) {
  const auto bytes = encode_checkpoint(tensors);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

std::vector<CheckpointTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

std::vector<double> encode_network_config(const NetworkConfig& c) {
  std::vector<double> v{static_cast<double>(c.crop_size), static_cast<double>(c.conv_blocks.size())};
  for (const auto& b : c.conv_blocks) {
    v.insert(v.end(), {static_cast<double>(b.kernel), static_cast<double>(b.channels), static_cast<double>(b.stride),
                       static_cast<double>(b.pad)});
  }
  for (auto s : c.skip_channels) v.push_back(static_cast<double>(s));
  v.push_back(static_cast<double>(c.embed_dim));
  v.push_back(static_cast<double>(c.lstm_units));
  v.push_back(static_cast<double>(c.seed));
  return v;
}

NetworkConfig decode_network_config(std::span<const double> v) {
  auto at = [&](std::size_t i) {
    if (i >= v.size()) throw FormatError("network config record truncated");
    return v[i];
  };
  auto count = [&](std::size_t i) {
    const double x = at(i);
    if (!(x >= 0.0) || x != std::floor(x)) throw FormatError("network config holds a non-integer size");
    return static_cast<std::size_t>(x);
  };
  NetworkConfig c;
  c.crop_size = count(0);
  const std::size_t blocks = count(1);
  std::size_t i = 2;
  c.conv_blocks.clear();
  for (std::size_t b = 0; b < blocks; ++b, i += 4) {
    c.conv_blocks.push_back({count(i), count(i + 1), count(i + 2), static_cast<int>(at(i + 3))});
  }
  c.skip_channels.clear();
  for (std::size_t b = 0; b < blocks; ++b) c.skip_channels.push_back(count(i++));
  c.embed_dim = count(i++);
  c.lstm_units = count(i++);
  c.seed = static_cast<std::uint64_t>(at(i++));
  if (i != v.size()) throw FormatError("network config record has trailing values");
  c.validate();
  return c;
}

void save_network(const std::filesystem::path& path, const NetworkParams& params, DType dtype) {
  std::vector<CheckpointTensor> tensors;
  const auto cfg = encode_network_config(params.config());
  tensors.push_back({kConfigTensor, DType::f64, Tensor::from({cfg.size()}, cfg)});
  for (const auto& [name, t] : params.named_tensors()) tensors.push_back({name, dtype, t});
  write_checkpoint(path, tensors);
}

NetworkParams load_network(const std::filesystem::path& path) {
  auto tensors = read_checkpoint(path);
  std::vector<std::pair<std::string, Tensor>> named;
  const Tensor* cfg = nullptr;
  for (const auto& t : tensors) {
    if (t.name == kConfigTensor) {
      cfg = &t.tensor;
    } else {
      named.emplace_back(t.name, t.tensor);
    }
  }
  if (!cfg) throw FormatError(path.string() + ": checkpoint has no network config record");
  return NetworkParams::from_named(decode_network_config(cfg->data()), named);
}

}  // namespace rrtrack
