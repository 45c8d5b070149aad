#pragma once

// Little-endian binary helpers shared by the dataset cache and checkpoints.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "ddmlab/autograd.hpp"
#include "ddmlab/errors.hpp"

namespace ddmlab {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }

  template <typename T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  template <typename T>
  void array(const std::vector<T>& v) {
    pod<std::uint64_t>(v.size());
    bytes(v.data(), v.size() * sizeof(T));
  }
  void matrix(const Mat& m) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed for '" + path_ + "'");
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "'");
  }

  template <typename T>
  T pod() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    read(&v, sizeof(T));
    return v;
  }
  void read(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("truncated file '" + path_ + "'");
  }
  std::string string(std::uint64_t max_len = 1ULL << 30) {
    const auto n = pod<std::uint64_t>();
    if (n > max_len) throw FormatError("implausible string length in '" + path_ + "'");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  template <typename T>
  std::vector<T> array(std::uint64_t max_len = 1ULL << 34) {
    const auto n = pod<std::uint64_t>();
    if (n > max_len) throw FormatError("implausible array length in '" + path_ + "'");
    std::vector<T> v(n);
    read(v.data(), n * sizeof(T));
    return v;
  }
  Mat matrix() {
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (rows > (1ULL << 31) || cols > (1ULL << 31)) throw FormatError("implausible matrix shape in '" + path_ + "'");
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    read(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace ddmlab
