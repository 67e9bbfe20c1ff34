#pragma once

// Versioned binary container of named entries: shape-tagged f64 arrays,
// u64 arrays and strings. Values are stored bit-for-bit (little endian).

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace psketch {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct F64Array {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
  bool operator==(const F64Array&) const = default;
};

class Checkpoint {
 public:
  using Entry = std::variant<F64Array, std::vector<std::uint64_t>, std::string>;

  void put(const std::string& name, std::vector<std::uint64_t> shape, std::span<const double> values);
  void put(const std::string& name, std::span<const double> values);
  void put_u64(const std::string& name, std::vector<std::uint64_t> values);
  void put_u64(const std::string& name, std::uint64_t value) { put_u64(name, std::vector{value}); }
  void put_string(const std::string& name, std::string value);

  bool contains(const std::string& name) const { return entries_.contains(name); }
  const F64Array& array(const std::string& name) const;
  /// Copies a stored array into `out`, which must have the same length.
  void read_into(const std::string& name, std::span<double> out) const;
  const std::vector<std::uint64_t>& u64s(const std::string& name) const;
  std::uint64_t u64(const std::string& name) const;
  const std::string& string(const std::string& name) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  /// Serialises into bytes (same as the file format).
  std::string to_bytes() const;
  static Checkpoint from_bytes(const std::string& bytes);

  bool operator==(const Checkpoint&) const = default;

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace psketch
