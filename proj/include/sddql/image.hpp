#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sddql {

// 2D image, row-major, double pixels regardless of file depth.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // size == width*height, pixel(r,c) = pixels[r*width+c]

    Image() = default;
    Image(int w, int h, double fill = 0.0);
    Image(int w, int h, std::vector<double> px);

    int pixel_count() const { return width * height; }
    double& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
};

enum class ImageFormat { PGM8, PGM16, RAW_F32LE };

struct ImageStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;  // population convention (divide by N)
};

// Throws std::invalid_argument if dimensions/pixel length disagree or pixels are non-finite.
void validate_image(const Image& img);

// RAW_F32LE is headerless; width/height must be passed for it and are ignored for PGM.
Image load_image(const std::string& path, ImageFormat format, int width = 0, int height = 0);

// PGM formats round to nearest and clamp to [0, maxval]; RAW_F32LE is a lossless float32 dump.
void save_image(const Image& img, const std::string& path, ImageFormat format);

ImageStats image_stats(const Image& img);

Image transpose(const Image& img);

ImageFormat parse_image_format(const std::string& name);  // "pgm8" | "pgm16" | "raw32"
std::string image_format_name(ImageFormat format);

// Picks the format from the file extension (.pgm -> PGM16 on save, header-driven on load;
// anything else -> RAW_F32LE).
ImageFormat format_from_path(const std::string& path);

}  // namespace sddql
