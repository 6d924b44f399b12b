#pragma once

#include <string>
#include <vector>

#include "can/data.hpp"
#include "can/tensor.hpp"

namespace can {

/// Extracts row `index` of a batch as a height x width image tensor.
Tensor image_from_batch(const ImageBatch& batch, std::size_t index);

/// Maps [-1, 1] intensities to 0..255 bytes, row-major (clamped, rounded).
std::vector<unsigned char> gray_bytes(const Tensor& image);

/// Binary 8-bit PGM ("P5") encoding of a grayscale image.
std::string pgm_encode(const Tensor& image);
void write_pgm(const std::string& path, const Tensor& image);

/// Minimal grayscale 8-bit PNG encoding (zlib-compressed scanlines,
/// filter type 0 on every row).
std::string png_encode_gray(const Tensor& image);
void write_png_gray(const std::string& path, const Tensor& image);

}  // namespace can
