#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "slmc/targets.hpp"
#include "slmc/types.hpp"

namespace slmc {

using json = nlohmann::json;

// Shortest decimal that round-trips the exact 64-bit value.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void write_cells(const std::vector<std::string>& cells);

  template <typename... Ts>
  void row(const Ts&... values) {
    write_cells({cell(values)...});
  }

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& s) { return s; }

 private:
  std::ofstream os_;
  std::size_t columns_;
};

void write_json_file(const std::filesystem::path& path, const json& j);
json read_json_file(const std::filesystem::path& path);

json to_json(const SpectralData& data);
SpectralData spectral_from_json(const json& j);
json to_json(const SensorData& data);
SensorData sensor_from_json(const json& j);
json to_json(const IcgData& data);
IcgData icg_from_json(const json& j);

}  // namespace slmc
