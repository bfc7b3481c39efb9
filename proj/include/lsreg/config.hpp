#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace lsreg {

// INI-style key-value configuration:
//
//   # comment
//   [section]
//   key = value
//
// Keys outside any section live in section "". Later duplicates override.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback = "") const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  // Comma- or whitespace-separated list.
  std::vector<double> get_list(const std::string& section, const std::string& key,
                               const std::vector<double>& fallback = {}) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // Sorted "section.key=value" lines; hashing input.
  std::string canonical() const;
  // FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return data_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> data_;
};

std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

// Fixed-format number rendering so CSV output is byte-stable.
std::string fmt(double v, int digits = 12);

// CSV writer that appends the config hash as the last column of every row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header, std::string config_hash);
  void row(const std::vector<std::string>& cells);
  std::size_t rows() const { return rows_; }

 private:
  std::ostream& os_;
  std::size_t columns_;
  std::string hash_;
  std::size_t rows_ = 0;
};

}  // namespace lsreg
