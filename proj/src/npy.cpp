#include "mrpcen/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>

#include "mrpcen/error.hpp"

namespace mrpcen {

namespace {
constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreambleLen = kMagicLen + 2 + 2;
}  // namespace

std::size_t Tensor3f::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor3f pack_layers(const std::vector<Eigen::MatrixXd>& layers) {
  require(!layers.empty(), "pack_layers: no layers");
  const auto rows = static_cast<std::size_t>(layers.front().rows());
  const auto cols = static_cast<std::size_t>(layers.front().cols());
  const std::size_t n = layers.size();
  for (const auto& l : layers) {
    require(static_cast<std::size_t>(l.rows()) == rows && static_cast<std::size_t>(l.cols()) == cols,
            "pack_layers: layers differ in shape");
  }
  Tensor3f t{{rows, cols, n}, std::vector<float>(rows * cols * n)};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        t.data[(i * cols + j) * n + k] =
            static_cast<float>(layers[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
    }
  }
  return t;
}

Tensor3f pack_stack(const MultiRateStack& stack) { return pack_layers(stack.layers); }

std::string npy_header(const std::vector<std::size_t>& shape) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    dict += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) dict += ",";
    if (i + 1 < shape.size()) dict += " ";
  }
  dict += "), }";
  // Pad with spaces so data starts on a 64-byte boundary; newline last.
  const std::size_t unpadded = kPreambleLen + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict += '\n';
  require(dict.size() <= 0xFFFF, "npy_header: header too long for format 1.0");

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xFF));
  out.push_back(static_cast<char>(dict.size() >> 8));
  return out + dict;
}

void write_npy(const std::filesystem::path& path, const Tensor3f& tensor) {
  require(tensor.data.size() == tensor.numel(), "write_npy: data size does not match shape");
  const std::string header = npy_header(tensor.shape);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write NPY file: " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  static_assert(sizeof(float) == 4);
  for (float v : tensor.data) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    const char le[4] = {static_cast<char>(u & 0xFF), static_cast<char>((u >> 8) & 0xFF),
                        static_cast<char>((u >> 16) & 0xFF), static_cast<char>(u >> 24)};
    out.write(le, 4);
  }
  if (!out) throw IoError("short write: " + path.string());
}

Tensor3f read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open NPY file: " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string name = path.string();

  if (bytes.size() < kPreambleLen || bytes.compare(0, kMagicLen, kMagic, kMagicLen) != 0) {
    throw FormatError(name + ": missing NPY magic");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  if (major != 1) throw FormatError(name + ": unsupported NPY version " + std::to_string(major));
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreambleLen + header_len) {
    throw FormatError(name + ": truncated header: expected " + std::to_string(kPreambleLen + header_len) +
                      " bytes, file has " + std::to_string(bytes.size()));
  }
  const std::string header = bytes.substr(kPreambleLen, header_len);

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')"))) {
    throw FormatError(name + ": header has no descr");
  }
  if (m[1] != "<f4") throw FormatError(name + ": unsupported dtype '" + m[1].str() + "', expected '<f4'");
  if (!std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*(True|False))"))) {
    throw FormatError(name + ": header has no fortran_order");
  }
  if (m[1] == "True") throw FormatError(name + ": Fortran-ordered arrays are not supported");
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw FormatError(name + ": header has no shape");
  }

  Tensor3f t;
  const std::string dims = m[1];
  const std::regex number(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), number); it != std::sregex_iterator(); ++it) {
    t.shape.push_back(std::stoull(it->str()));
  }

  const std::size_t expected = 4 * t.numel();
  const std::size_t found = bytes.size() - kPreambleLen - header_len;
  if (found != expected) {
    throw FormatError(name + ": payload length mismatch: shape (" + dims + ") needs " +
                      std::to_string(expected) + " bytes, file has " + std::to_string(found));
  }
  t.data.resize(t.numel());
  const char* p = bytes.data() + kPreambleLen + header_len;
  for (std::size_t i = 0; i < t.data.size(); ++i, p += 4) {
    const std::uint32_t u = static_cast<unsigned char>(p[0]) | (static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
                            (static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
                            (static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24);
    std::memcpy(&t.data[i], &u, 4);
  }
  return t;
}

}  // namespace mrpcen
