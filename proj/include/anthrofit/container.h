#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace anthrofit {

enum class DType { kF32, kI32, kF64 };

/// One named tensor of a binary container. Values are kept as doubles or
/// integers in memory; the dtype controls the on-disk encoding.
struct Tensor {
  DType dtype = DType::kF32;
  std::vector<int64_t> shape;
  std::vector<double> real;
  std::vector<int32_t> integer;

  int64_t numel() const;
};

/// Magic + length-prefixed JSON header + raw little-endian payload.
///
/// Layout: bytes 0-3 magic, bytes 4-7 u32 header length H, bytes 8..8+H the
/// UTF-8 JSON header, then the payload. The header's "tensors" array lists
/// {name, dtype, shape, offset, length}; offsets are relative to the payload
/// start. Tensors are written in the order they were inserted.
struct Container {
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(std::string_view name) const;
  void add(std::string name, Tensor tensor);
};

/// Row-major copy of a matrix; `shape` defaults to {rows, cols}.
Tensor realTensor(const Eigen::MatrixXd& m, DType dtype, std::vector<int64_t> shape = {});

/// Interprets a real tensor's row-major data as rows x cols.
Eigen::MatrixXd tensorMatrix(const Tensor& t, int64_t rows, int64_t cols);

Container readContainer(const std::filesystem::path& path, std::string_view magic);
Container parseContainer(const std::vector<char>& bytes, std::string_view magic);

std::vector<char> serializeContainer(const Container& container, std::string_view magic);
void writeContainer(const std::filesystem::path& path, const Container& container, std::string_view magic);

std::vector<char> readBytes(const std::filesystem::path& path);
void writeBytes(const std::filesystem::path& path, const std::vector<char>& bytes);

} // namespace anthrofit
