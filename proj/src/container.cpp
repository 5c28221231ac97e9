#include "anthrofit/container.h"

#include "anthrofit/error.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace anthrofit {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

std::string_view dtypeName(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return "f32";
    case DType::kI32:
      return "i32";
    case DType::kF64:
      return "f64";
  }
  return "f32";
}

DType parseDtype(const std::string& name) {
  if (name == "f32") {
    return DType::kF32;
  }
  if (name == "i32") {
    return DType::kI32;
  }
  if (name == "f64") {
    return DType::kF64;
  }
  throw Error(ErrorCode::kTensorShapeMismatch, "unknown dtype '" + name + "'");
}

size_t elementSize(DType dtype) {
  return dtype == DType::kF64 ? 8 : 4;
}

} // namespace

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (const auto d : shape) {
    n *= d;
  }
  return n;
}

Tensor realTensor(const Eigen::MatrixXd& m, DType dtype, std::vector<int64_t> shape) {
  Tensor t;
  t.dtype = dtype;
  t.shape = shape.empty() ? std::vector<int64_t>{m.rows(), m.cols()} : std::move(shape);
  t.real.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      t.real.push_back(m(r, c));
    }
  }
  return t;
}

Eigen::MatrixXd tensorMatrix(const Tensor& t, int64_t rows, int64_t cols) {
  ANTHROFIT_THROW_IF(
      t.dtype == DType::kI32 || static_cast<int64_t>(t.real.size()) != rows * cols,
      ErrorCode::kTensorShapeMismatch,
      "tensor does not hold " + std::to_string(rows) + " x " + std::to_string(cols) + " reals");
  Eigen::MatrixXd m(rows, cols);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      m(r, c) = t.real[r * cols + c];
    }
  }
  return m;
}

const Tensor* Container::find(std::string_view name) const {
  for (const auto& [key, tensor] : tensors) {
    if (key == name) {
      return &tensor;
    }
  }
  return nullptr;
}

void Container::add(std::string name, Tensor tensor) {
  for (auto& [key, existing] : tensors) {
    if (key == name) {
      existing = std::move(tensor);
      return;
    }
  }
  tensors.emplace_back(std::move(name), std::move(tensor));
}

std::vector<char> readBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  ANTHROFIT_THROW_IF(!in, ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void writeBytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  ANTHROFIT_THROW_IF(!out, ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  ANTHROFIT_THROW_IF(!out, ErrorCode::kIoError, "short write to '" + path.string() + "'");
}

Container parseContainer(const std::vector<char>& bytes, std::string_view magic) {
  ANTHROFIT_THROW_IF(
      bytes.size() < 8 || std::memcmp(bytes.data(), magic.data(), 4) != 0,
      ErrorCode::kMagicMismatch,
      "expected magic '" + std::string(magic) + "'");

  uint32_t headerLength = 0;
  std::memcpy(&headerLength, bytes.data() + 4, 4);
  ANTHROFIT_THROW_IF(
      static_cast<uint64_t>(headerLength) + 8 > bytes.size(),
      ErrorCode::kTensorShapeMismatch,
      "header length " + std::to_string(headerLength) + " exceeds file size " + std::to_string(bytes.size()));

  Container container;
  try {
    container.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + headerLength);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTensorShapeMismatch, std::string("malformed header: ") + e.what());
  }
  ANTHROFIT_THROW_IF(
      !container.header.is_object() || !container.header.contains("tensors") ||
          !container.header["tensors"].is_array(),
      ErrorCode::kTensorShapeMismatch,
      "header has no tensor table");

  const char* payload = bytes.data() + 8 + headerLength;
  const uint64_t payloadSize = bytes.size() - 8 - headerLength;

  try {
    for (const auto& entry : container.header["tensors"]) {
      Tensor tensor;
      tensor.dtype = parseDtype(entry.at("dtype").get<std::string>());
      tensor.shape = entry.at("shape").get<std::vector<int64_t>>();
      const auto offset = entry.at("offset").get<uint64_t>();
      const auto length = entry.at("length").get<uint64_t>();
      const auto name = entry.at("name").get<std::string>();
      for (const auto d : tensor.shape) {
        ANTHROFIT_THROW_IF(d < 0, ErrorCode::kTensorShapeMismatch, "negative extent in '" + name + "'");
      }
      const auto n = static_cast<uint64_t>(tensor.numel());
      ANTHROFIT_THROW_IF(
          length != n * elementSize(tensor.dtype),
          ErrorCode::kTensorShapeMismatch,
          "tensor '" + name + "' length does not match its shape");
      ANTHROFIT_THROW_IF(
          offset > payloadSize || length > payloadSize - offset,
          ErrorCode::kTensorShapeMismatch,
          "tensor '" + name + "' extends past the payload");
      const char* src = payload + offset;
      switch (tensor.dtype) {
        case DType::kF32: {
          std::vector<float> tmp(n);
          std::memcpy(tmp.data(), src, length);
          tensor.real.assign(tmp.begin(), tmp.end());
          break;
        }
        case DType::kF64:
          tensor.real.resize(n);
          std::memcpy(tensor.real.data(), src, length);
          break;
        case DType::kI32:
          tensor.integer.resize(n);
          std::memcpy(tensor.integer.data(), src, length);
          break;
      }
      container.add(name, std::move(tensor));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kTensorShapeMismatch, std::string("malformed tensor entry: ") + e.what());
  }
  return container;
}

Container readContainer(const std::filesystem::path& path, std::string_view magic) {
  return parseContainer(readBytes(path), magic);
}

std::vector<char> serializeContainer(const Container& container, std::string_view magic) {
  nlohmann::json header = container.header;
  header["tensors"] = nlohmann::json::array();

  std::vector<char> payload;
  for (const auto& [name, tensor] : container.tensors) {
    const auto n = static_cast<size_t>(tensor.numel());
    const size_t offset = payload.size();
    const size_t length = n * elementSize(tensor.dtype);
    payload.resize(offset + length);
    char* dst = payload.data() + offset;
    switch (tensor.dtype) {
      case DType::kF32: {
        ANTHROFIT_THROW_IF(tensor.real.size() != n, ErrorCode::kTensorShapeMismatch, name);
        std::vector<float> tmp(tensor.real.begin(), tensor.real.end());
        std::memcpy(dst, tmp.data(), length);
        break;
      }
      case DType::kF64:
        ANTHROFIT_THROW_IF(tensor.real.size() != n, ErrorCode::kTensorShapeMismatch, name);
        std::memcpy(dst, tensor.real.data(), length);
        break;
      case DType::kI32:
        ANTHROFIT_THROW_IF(tensor.integer.size() != n, ErrorCode::kTensorShapeMismatch, name);
        std::memcpy(dst, tensor.integer.data(), length);
        break;
    }
    header["tensors"].push_back(
        {{"name", name},
         {"dtype", dtypeName(tensor.dtype)},
         {"shape", tensor.shape},
         {"offset", offset},
         {"length", length}});
  }

  const std::string text = header.dump();
  const auto headerLength = static_cast<uint32_t>(text.size());
  std::vector<char> bytes(8 + text.size() + payload.size());
  std::memcpy(bytes.data(), magic.data(), 4);
  std::memcpy(bytes.data() + 4, &headerLength, 4);
  std::memcpy(bytes.data() + 8, text.data(), text.size());
  std::memcpy(bytes.data() + 8 + text.size(), payload.data(), payload.size());
  return bytes;
}

void writeContainer(const std::filesystem::path& path, const Container& container, std::string_view magic) {
  writeBytes(path, serializeContainer(container, magic));
}

} // namespace anthrofit
