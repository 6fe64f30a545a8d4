#pragma once

#include <cstdint>
#include <string>

#include "arsp/tensor.hpp"

namespace arsp {

// RGB face image, pixels in [0,1], shape [3,H,W].
struct FaceImage {
    Tensor pixels;

    int height() const { return pixels.dim(1); }
    int width() const { return pixels.dim(2); }
};

// Validates shape and range.
FaceImage make_face_image(Tensor pixels);

// 8-bit truecolor PNG; pixel byte = round(255 * value).
void save_png(const std::string& path, const FaceImage& image);

uint64_t image_hash(const FaceImage& image);

} // namespace arsp
