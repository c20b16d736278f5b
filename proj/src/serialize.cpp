#include "g2p/serialize.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace g2p {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace {
constexpr std::uint64_t kMaxLength = 1ULL << 34;
}

void BinaryWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw FormatError("write failed");
}

void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }

void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  raw(s.data(), s.size());
}

void BinaryWriter::tensor(const Tensor& t) {
  u64(t.shape().size());
  for (int d : t.shape()) i64(d);
  raw(t.data(), t.size() * sizeof(float));
}

void BinaryWriter::params(const std::vector<const nn::Param*>& ps) {
  u64(ps.size());
  for (const nn::Param* p : ps) {
    str(p->name);
    tensor(p->value);
  }
}

void BinaryReader::raw(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in_) throw FormatError("unexpected end of file");
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  if (n > kMaxLength) throw FormatError("corrupt string length");
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

Tensor BinaryReader::tensor() {
  const std::uint64_t rank = u64();
  if (rank > 8) throw FormatError("corrupt tensor rank");
  std::vector<int> shape;
  for (std::uint64_t i = 0; i < rank; ++i) {
    const std::int64_t d = i64();
    if (d < 0 || d > (1 << 24)) throw FormatError("corrupt tensor dimension");
    shape.push_back(static_cast<int>(d));
  }
  Tensor t(shape);
  raw(t.data(), t.size() * sizeof(float));
  return t;
}

void BinaryReader::params(const std::vector<nn::Param*>& ps) {
  const std::uint64_t n = u64();
  if (n != ps.size()) {
    throw FormatError("parameter count mismatch: file has " + std::to_string(n) + ", model has " +
                      std::to_string(ps.size()));
  }
  for (nn::Param* p : ps) {
    const std::string name = str();
    if (name != p->name) throw FormatError("parameter name mismatch: " + name + " vs " + p->name);
    Tensor t = tensor();
    if (!t.same_shape(p->value)) throw FormatError("parameter shape mismatch for " + name);
    p->value = std::move(t);
  }
}

}  // namespace g2p
