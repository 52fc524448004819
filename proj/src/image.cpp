#include "sddql/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sddql {

Image::Image(int w, int h, double fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw std::invalid_argument("Image: dimensions must be positive");
    pixels.assign(static_cast<size_t>(w) * h, fill);
}

Image::Image(int w, int h, std::vector<double> px) : width(w), height(h), pixels(std::move(px)) {
    validate_image(*this);
}

void validate_image(const Image& img) {
    if (img.width < 1 || img.height < 1)
        throw std::invalid_argument("Image: dimensions must be positive");
    if (img.pixels.size() != static_cast<size_t>(img.width) * img.height)
        throw std::invalid_argument("Image: pixel count does not match dimensions");
    for (double v : img.pixels)
        if (!std::isfinite(v)) throw std::invalid_argument("Image: non-finite pixel value");
}

namespace {

// Skips PNM whitespace and '#' comment lines, then reads one nonnegative integer.
int read_pnm_int(std::istream& in) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw std::runtime_error("PGM: malformed header");
    long value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        if (value > 1000000000L) throw std::runtime_error("PGM: header value out of range");
        c = in.get();
    }
    return static_cast<int>(value);
}

Image load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw std::runtime_error("PGM: expected P5 magic in " + path);
    const int width = read_pnm_int(in);
    const int height = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
        throw std::runtime_error("PGM: malformed header in " + path);
    // header ends with exactly one whitespace byte, already consumed by read_pnm_int

    const size_t n = static_cast<size_t>(width) * height;
    const bool wide = maxval > 255;
    std::vector<unsigned char> raw(n * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<size_t>(in.gcount()) != raw.size())
        throw std::runtime_error("PGM: truncated pixel data in " + path);

    Image img(width, height);
    if (wide) {
        for (size_t i = 0; i < n; ++i)  // big-endian per PNM spec
            img.pixels[i] = static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]);
    } else {
        for (size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<double>(raw[i]);
    }
    return img;
}

Image load_raw_f32(const std::string& path, int width, int height) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("RAW_F32LE load requires explicit positive dimensions");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<size_t>(in.tellg());
    const size_t n = static_cast<size_t>(width) * height;
    if (file_size != 4 * n)
        throw std::runtime_error("RAW_F32LE: file size " + std::to_string(file_size) +
                                 " does not match 4*" + std::to_string(width) + "*" +
                                 std::to_string(height));
    in.seekg(0, std::ios::beg);
    std::vector<float> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(4 * n));
    if (static_cast<size_t>(in.gcount()) != 4 * n)
        throw std::runtime_error("RAW_F32LE: short read from " + path);

    Image img(width, height);
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(raw[i]))
            throw std::runtime_error("RAW_F32LE: non-finite value at index " + std::to_string(i));
        img.pixels[i] = static_cast<double>(raw[i]);
    }
    return img;
}

void save_pgm(const Image& img, const std::string& path, int maxval) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
    const size_t n = img.pixels.size();
    const bool wide = maxval > 255;
    std::vector<unsigned char> raw(n * (wide ? 2 : 1));
    for (size_t i = 0; i < n; ++i) {
        double v = std::round(img.pixels[i]);
        v = std::clamp(v, 0.0, static_cast<double>(maxval));
        const auto q = static_cast<unsigned>(v);
        if (wide) {
            raw[2 * i] = static_cast<unsigned char>(q >> 8);
            raw[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
        } else {
            raw[i] = static_cast<unsigned char>(q);
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

void save_raw_f32(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    std::vector<float> raw(img.pixels.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(img.pixels[i]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(4 * raw.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

Image load_image(const std::string& path, ImageFormat format, int width, int height) {
    Image img;
    switch (format) {
        case ImageFormat::PGM8:
        case ImageFormat::PGM16:
            img = load_pgm(path);
            break;
        case ImageFormat::RAW_F32LE:
            img = load_raw_f32(path, width, height);
            break;
    }
    validate_image(img);
    return img;
}

void save_image(const Image& img, const std::string& path, ImageFormat format) {
    validate_image(img);
    switch (format) {
        case ImageFormat::PGM8:
            save_pgm(img, path, 255);
            break;
        case ImageFormat::PGM16:
            save_pgm(img, path, 65535);
            break;
        case ImageFormat::RAW_F32LE:
            save_raw_f32(img, path);
            break;
    }
}

ImageStats image_stats(const Image& img) {
    validate_image(img);
    ImageStats s;
    s.min = img.pixels[0];
    s.max = img.pixels[0];
    double sum = 0.0;
    for (double v : img.pixels) {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        sum += v;
    }
    const double n = static_cast<double>(img.pixels.size());
    s.mean = sum / n;
    double ss = 0.0;
    for (double v : img.pixels) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / n);
    return s;
}

Image transpose(const Image& img) {
    Image out(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) out.at(c, r) = img.at(r, c);
    return out;
}

ImageFormat parse_image_format(const std::string& name) {
    if (name == "pgm8") return ImageFormat::PGM8;
    if (name == "pgm16") return ImageFormat::PGM16;
    if (name == "raw32") return ImageFormat::RAW_F32LE;
    throw std::invalid_argument("unknown image format: " + name);
}

std::string image_format_name(ImageFormat format) {
    switch (format) {
        case ImageFormat::PGM8: return "pgm8";
        case ImageFormat::PGM16: return "pgm16";
        case ImageFormat::RAW_F32LE: return "raw32";
    }
    return "?";
}

ImageFormat format_from_path(const std::string& path) {
    const auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
    if (ext == "pgm") return ImageFormat::PGM16;
    return ImageFormat::RAW_F32LE;
}

}  // namespace sddql
