#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mousse/linalg.hpp"

namespace mousse {

/// Named collection of float64 arrays, written as a versioned binary file.
///
/// Layout (all integers and floats little-endian):
///
///   bytes 0..7   magic "MOUSSECK"
///   u32          format version (currently 1)
///   u32          section count
///   per section:
///     u32        name length, followed by the UTF-8 name
///     u64 u64    rows, cols
///     f64 * rows*cols   entries in row-major order
///
/// Scalars and integer counters are stored as 1x1 sections; integers are
/// exact up to 2^53. Sections keep insertion order, so writing the same
/// content twice yields identical bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, const Matrix& value);
  void put_vector(const std::string& name, const Vector& value);
  void put_scalar(const std::string& name, double value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Matrix& get(const std::string& name) const;
  Vector get_vector(const std::string& name) const;
  double get_scalar(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return sections_.size(); }

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  void write(const std::filesystem::path& path) const;
  static Checkpoint read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, Matrix>> sections_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace mousse
