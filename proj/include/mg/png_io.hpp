#pragma once

#include "mg/image.hpp"

#include <string>

namespace mg {

/// 8-bit PNG (RGB or gray) decoded as v/255 per channel; gray expands to RGB.
ImageTensor load_image(const std::string& path);

/// Saves as 8-bit RGB PNG, rounding v*255 to nearest byte.
void save_image(const ImageTensor& img, const std::string& path);

/// Luminance >= threshold maps to 1, else 0. Accepts gray or RGB input;
/// RGB luminance is the unweighted channel mean.
BinaryMask load_mask(const std::string& path, int threshold = 128);

/// Saves as 8-bit gray PNG, 1 -> 255 and 0 -> 0.
void save_mask(const BinaryMask& m, const std::string& path);

}  // namespace mg
