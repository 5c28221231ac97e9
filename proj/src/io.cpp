#include "anthrofit/io.h"

#include "anthrofit/error.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace anthrofit {

std::string readText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  ANTHROFIT_THROW_IF(!in, ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void writeText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  ANTHROFIT_THROW_IF(!out, ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << text;
  ANTHROFIT_THROW_IF(!out, ErrorCode::kIoError, "write to '" + path.string() + "' failed");
}

std::vector<nlohmann::json> parseJsonLines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return out;
}

std::vector<nlohmann::json> readJsonLines(const std::filesystem::path& path) {
  return parseJsonLines(readText(path));
}

nlohmann::json readJson(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(readText(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

namespace {

std::vector<std::string> splitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    cells.emplace_back();
  }
  return cells;
}

} // namespace

CsvTable parseCsv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    auto cells = splitLine(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
      continue;
    }
    ANTHROFIT_THROW_IF(
        cells.size() != table.header.size(),
        ErrorCode::kParseError,
        "CSV row " + std::to_string(table.rows.size() + 1) + " has " + std::to_string(cells.size()) +
            " cells, header has " + std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

double parseNumber(const std::string& cell) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && *begin == ' ') {
    ++begin;
  }
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  ANTHROFIT_THROW_IF(
      ec != std::errc() || ptr != end, ErrorCode::kParseError, "not a number: '" + cell + "'");
  return value;
}

std::string formatNumber(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

} // namespace anthrofit
