#pragma once

#include <string>

#include "gav/tensor.hpp"

namespace gav {
namespace img {

/// Images are H x W x C tensors, C in {1, 3}, values in [0,1].
void validate_image(const Tensor& image, const char* what);

/// Lossless 8-bit views for humans: binary PPM (P6) for RGB, PGM (P5) for
/// single-channel. Values are clamped then rounded.
void write_ppm(const Tensor& image, const std::string& path);

/// Raw f32 dump (`.limg`) used wherever tests need exact pixel values.
void write_raw(const Tensor& image, const std::string& path);
Tensor read_raw(const std::string& path);

}  // namespace img
}  // namespace gav
