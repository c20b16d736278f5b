#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "g2p/nn.hpp"

namespace g2p {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian binary record writer/reader used by checkpoints and extractor blobs.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void raw(const void* data, std::size_t n);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void str(const std::string& s);
  void tensor(const Tensor& t);
  void params(const std::vector<const nn::Param*>& ps);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}
  void raw(void* data, std::size_t n);
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::string str();
  Tensor tensor();
  // Reads values into existing parameters; names and shapes must match.
  void params(const std::vector<nn::Param*>& ps);

 private:
  std::istream& in_;
};

}  // namespace g2p
