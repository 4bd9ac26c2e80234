#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mrpcen/pcen.hpp"

namespace mrpcen {

/// Dense little-endian float32 tensor in C order, as stored in NPY v1.0.
struct Tensor3f {
  std::vector<std::size_t> shape;  // (n_mels, n_frames, n_layers)
  std::vector<float> data;

  [[nodiscard]] std::size_t numel() const;
  [[nodiscard]] float at(std::size_t band, std::size_t frame, std::size_t layer) const {
    return data[(band * shape[1] + frame) * shape[2] + layer];
  }
};

/// Packs matrices of equal shape as layers of a (rows, cols, n) tensor.
Tensor3f pack_layers(const std::vector<Eigen::MatrixXd>& layers);
Tensor3f pack_stack(const MultiRateStack& stack);

/// NPY v1.0 header text (magic, version, length, dict, padding, newline).
std::string npy_header(const std::vector<std::size_t>& shape);

void write_npy(const std::filesystem::path& path, const Tensor3f& tensor);

/// Accepts '<f4', C order, any rank; shape is reported as stored. Throws
/// FormatError on a bad magic, unsupported dtype or layout, or a payload
/// whose byte length disagrees with the header.
Tensor3f read_npy(const std::filesystem::path& path);

}  // namespace mrpcen
