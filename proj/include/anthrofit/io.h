#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace anthrofit {

std::string readText(const std::filesystem::path& path);
void writeText(const std::filesystem::path& path, const std::string& text);

/// One JSON value per non-blank line.
std::vector<nlohmann::json> parseJsonLines(const std::string& text);
std::vector<nlohmann::json> readJsonLines(const std::filesystem::path& path);
nlohmann::json readJson(const std::filesystem::path& path);

/// Numeric CSV with a header row. Cells are parsed as doubles.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const; // -1 when absent
};

CsvTable parseCsv(const std::string& text);
double parseNumber(const std::string& cell);

/// Shortest text that parses back to the same double.
std::string formatNumber(double value);

} // namespace anthrofit
