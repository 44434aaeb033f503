#include "decoil/fileio.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "decoil/error.hpp"

namespace decoil::io {

std::uint64_t SeededGenerator::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

FxValue unit_value(std::uint64_t bits, FixedPointFormat fmt) {
  const int shift = 63 - fmt.fraction_bits;
  return {static_cast<std::int32_t>(static_cast<std::int64_t>(bits) >> shift)};
}

Tensor3D random_tensor(Dims dims, SeededGenerator& gen, FixedPointFormat fmt) {
  Tensor3D t(dims);
  for (auto& v : t.values()) v = unit_value(gen.next(), fmt);
  return t;
}

std::vector<FilterBank> random_weights(const NetworkSpec& net, SeededGenerator& gen) {
  const auto dims = chain_dims(net);
  std::vector<FilterBank> banks;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto* c = std::get_if<ConvSpec>(&net.layers[i]);
    if (!c) continue;
    const int d = dims[i].depth;
    const std::int32_t taps = c->kernel * c->kernel * d;
    FilterBank bank(c->filters, c->kernel, d);
    for (auto& v : bank.values()) v.raw = unit_value(gen.next(), net.format).raw / taps;
    banks.push_back(std::move(bank));
  }
  return banks;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(b[at + std::size_t(i)])) << (8 * i);
  return v;
}

void put_values(std::string& out, std::span<const FxValue> vals) {
  for (auto v : vals) put_u32(out, static_cast<std::uint32_t>(v.raw));
}

std::vector<FxValue> get_values(std::string_view b, std::size_t at, std::size_t count) {
  std::vector<FxValue> vals(count);
  for (std::size_t i = 0; i < count; ++i) vals[i].raw = static_cast<std::int32_t>(get_u32(b, at + 4 * i));
  return vals;
}

}  // namespace

std::string encode_tensor(const Tensor3D& t) {
  std::string out(kTensorMagic, 4);
  out.push_back(char(kTensorVersion));
  put_u32(out, std::uint32_t(t.dims().height));
  put_u32(out, std::uint32_t(t.dims().width));
  put_u32(out, std::uint32_t(t.dims().depth));
  put_values(out, t.values());
  return out;
}

Tensor3D decode_tensor(std::string_view bytes) {
  constexpr std::size_t header = 4 + 1 + 12;
  if (bytes.size() < header) {
    throw ValidationError("tensor file truncated: expected at least " + std::to_string(header) +
                          " header bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0) throw ValidationError("tensor file: bad magic");
  if (std::uint8_t(bytes[4]) != kTensorVersion) {
    throw ValidationError("tensor file: unsupported version " + std::to_string(std::uint8_t(bytes[4])));
  }
  const Dims d{int(get_u32(bytes, 5)), int(get_u32(bytes, 9)), int(get_u32(bytes, 13))};
  if (d.height < 1 || d.width < 1 || d.depth < 1) throw ValidationError("tensor file: zero dimension");
  const std::size_t expect = header + 4 * std::size_t(d.volume());
  if (bytes.size() != expect) {
    throw ValidationError("tensor file size mismatch: expected " + std::to_string(expect) + " bytes, got " +
                          std::to_string(bytes.size()));
  }
  return Tensor3D(d, get_values(bytes, header, std::size_t(d.volume())));
}

std::string encode_weights(const std::vector<FilterBank>& banks) {
  std::string out;
  for (const auto& b : banks) {
    put_u32(out, std::uint32_t(b.count()));
    put_u32(out, std::uint32_t(b.kernel()));
    put_u32(out, std::uint32_t(b.depth()));
    put_values(out, b.values());
  }
  return out;
}

std::vector<FilterBank> decode_weights(std::string_view bytes, const NetworkSpec& net) {
  const auto dims = chain_dims(net);
  std::size_t expect = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) {
      expect += 12 + 4 * std::size_t(c->filters) * c->kernel * c->kernel * dims[i].depth;
    }
  }
  if (bytes.size() != expect) {
    throw ValidationError("weights file size mismatch: expected " + std::to_string(expect) + " bytes, got " +
                          std::to_string(bytes.size()));
  }
  std::vector<FilterBank> banks;
  std::size_t at = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto* c = std::get_if<ConvSpec>(&net.layers[i]);
    if (!c) continue;
    const int k = int(get_u32(bytes, at));
    const int w = int(get_u32(bytes, at + 4));
    const int d = int(get_u32(bytes, at + 8));
    if (k != c->filters || w != c->kernel || d != dims[i].depth) {
      throw ValidationError("weights for layer " + std::to_string(i) + " are " + std::to_string(k) + "x" +
                                std::to_string(w) + "x" + std::to_string(w) + "x" + std::to_string(d) +
                                ", network expects " + std::to_string(c->filters) + "x" +
                                std::to_string(c->kernel) + "x" + std::to_string(c->kernel) + "x" +
                                std::to_string(dims[i].depth),
                            i);
    }
    at += 12;
    const std::size_t count = std::size_t(k) * w * w * d;
    banks.emplace_back(k, w, d, get_values(bytes, at, count));
    at += 4 * count;
  }
  return banks;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw Error("write failed: " + path);
}

std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace decoil::io
