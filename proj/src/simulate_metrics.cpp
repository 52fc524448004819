#include "sddql/simulate_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sddql {

namespace {

void validate_spec(const PhantomSpec& spec) {
    if (spec.size < 2) throw std::invalid_argument("phantom: size must be >= 2");
    if (spec.levels.size() < 2) throw std::invalid_argument("phantom: need at least 2 levels");
    std::vector<double> sorted = spec.levels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("phantom: levels must be distinct");
    for (double v : spec.levels)
        if (!std::isfinite(v)) throw std::invalid_argument("phantom: non-finite level");
}

Phantom checker(const PhantomSpec& spec) {
    const int n = spec.size;
    const int block = std::max(2, n / 8);
    Phantom ph{Image(n, n), std::vector<int>(static_cast<size_t>(n) * n)};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const int idx = static_cast<int>((r / block + c / block) % spec.levels.size());
            ph.image.at(r, c) = spec.levels[idx];
            ph.region[static_cast<size_t>(r) * n + c] = idx;
        }
    return ph;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1));
}

Phantom shapes(const PhantomSpec& spec) {
    const int n = spec.size;
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + 1);
    Phantom ph{Image(n, n, spec.levels[0]), std::vector<int>(static_cast<size_t>(n) * n, 0)};

    const int num_shapes = 8;
    const int num_fg_levels = static_cast<int>(spec.levels.size()) - 1;
    for (int i = 0; i < num_shapes; ++i) {
        const double level = spec.levels[1 + i % num_fg_levels];
        const int cr = uniform_int(rng, n / 6, n - 1 - n / 6);
        const int cc = uniform_int(rng, n / 6, n - 1 - n / 6);
        const int kind = i % 3;  // rectangle, ellipse, bar
        int hr, hc;
        if (kind == 2) {  // thin bar, alternate orientation
            const int thick = std::max(1, n / 48);
            const int length = std::max(2, n / 5);
            hr = (i % 2 == 0) ? thick : length;
            hc = (i % 2 == 0) ? length : thick;
        } else {
            hr = uniform_int(rng, std::max(1, n / 16), std::max(2, n / 7));
            hc = uniform_int(rng, std::max(1, n / 16), std::max(2, n / 7));
        }
        for (int r = std::max(0, cr - hr); r <= std::min(n - 1, cr + hr); ++r)
            for (int c = std::max(0, cc - hc); c <= std::min(n - 1, cc + hc); ++c) {
                if (kind == 1) {
                    const double dr = static_cast<double>(r - cr) / hr;
                    const double dc = static_cast<double>(c - cc) / hc;
                    if (dr * dr + dc * dc > 1.0) continue;
                }
                ph.image.at(r, c) = level;
                ph.region[static_cast<size_t>(r) * n + c] = i + 1;
            }
    }
    return ph;
}

Phantom text_like(const PhantomSpec& spec) {
    const int n = spec.size;
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + 2);
    Phantom ph{Image(n, n, spec.levels[0]), std::vector<int>(static_cast<size_t>(n) * n, 0)};

    const int num_fg_levels = static_cast<int>(spec.levels.size()) - 1;
    const int thick = std::max(1, n / 32);
    const int line_gap = std::max(3 * thick, n / 8);
    int stroke = 0;
    for (int y = line_gap / 2; y + thick < n; y += line_gap) {
        int x = uniform_int(rng, 0, thick);
        while (x < n - 2) {
            const int seg = uniform_int(rng, std::max(2, n / 24), std::max(3, n / 8));
            const int end = std::min(n - 1, x + seg);
            const double level = spec.levels[1 + stroke % num_fg_levels];
            for (int r = y; r < y + thick; ++r)
                for (int c = x; c <= end; ++c) {
                    ph.image.at(r, c) = level;
                    ph.region[static_cast<size_t>(r) * n + c] = stroke + 1;
                }
            ++stroke;
            x = end + 1 + uniform_int(rng, thick, std::max(thick + 1, n / 12));
        }
    }
    return ph;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
    validate_spec(spec);
    switch (spec.kind) {
        case PhantomKind::CHECKER: return checker(spec);
        case PhantomKind::SHAPES: return shapes(spec);
        case PhantomKind::TEXT_LIKE: return text_like(spec);
    }
    throw std::invalid_argument("phantom: unknown kind");
}

GammaSampler::GammaSampler(double shape, uint64_t seed)
    : shape_(shape), rng_(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL) {
    if (!(shape > 0.0)) throw std::invalid_argument("GammaSampler: shape must be > 0");
}

double GammaSampler::next_uniform() {
    // 53-bit mantissa draw in (0,1); zero is remapped to avoid log(0)
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
}

double GammaSampler::next_normal() {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return cached_normal_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_normal_ = radius * std::sin(angle);
    have_cached_normal_ = true;
    return radius * std::cos(angle);
}

double GammaSampler::sample() {
    // Marsaglia-Tsang squeeze method; shape < 1 boosted via Gamma(shape+1)*U^(1/shape)
    const double shape = shape_ < 1.0 ? shape_ + 1.0 : shape_;
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    double g;
    for (;;) {
        const double x = next_normal();
        const double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        const double v = t * t * t;
        const double u = next_uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2 || std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
            g = d * v;
            break;
        }
    }
    if (shape_ < 1.0) g *= std::pow(next_uniform(), 1.0 / shape_);
    return g / shape_;  // scale 1/shape: unit mean
}

Image apply_speckle(const Image& clean, const SpeckleSpec& spec) {
    validate_image(clean);
    if (!(spec.looks > 0.0)) throw std::invalid_argument("apply_speckle: looks must be > 0");
    for (double v : clean.pixels)
        if (v < 0.0) throw std::invalid_argument("apply_speckle: clean pixels must be >= 0");

    GammaSampler sampler(spec.looks, spec.seed);
    Image out(clean.width, clean.height);
    for (size_t i = 0; i < clean.pixels.size(); ++i) out.pixels[i] = clean.pixels[i] * sampler.sample();
    return out;
}

double snr_db(const Image& clean, const Image& estimate) {
    if (clean.width != estimate.width || clean.height != estimate.height)
        throw std::invalid_argument("snr_db: dimension mismatch");
    double signal = 0.0, error = 0.0;
    for (size_t i = 0; i < clean.pixels.size(); ++i) {
        signal += clean.pixels[i] * clean.pixels[i];
        const double e = clean.pixels[i] - estimate.pixels[i];
        error += e * e;
    }
    if (signal == 0.0) throw std::invalid_argument("snr_db: all-zero clean image");
    if (error == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal / error);
}

double ssim(const Image& clean, const Image& estimate, const MetricParams& params) {
    if (clean.width != estimate.width || clean.height != estimate.height)
        throw std::invalid_argument("ssim: dimension mismatch");
    const int win = params.ssim_window;
    if (win < 3 || win % 2 == 0) throw std::invalid_argument("ssim: window must be odd and >= 3");
    if (!(params.k1 > 0.0) || !(params.k2 > 0.0))
        throw std::invalid_argument("ssim: k1, k2 must be > 0");
    const int w = clean.width, h = clean.height;
    if (w < win || h < win) throw std::invalid_argument("ssim: image smaller than window");

    double range = params.dynamic_range;
    if (range <= 0.0) {
        const ImageStats st = image_stats(clean);
        range = st.max - st.min;
        if (range <= 0.0) range = 1.0;  // constant clean image
    }
    const double c1 = params.k1 * range * params.k1 * range;
    const double c2 = params.k2 * range * params.k2 * range;

    // normalized separable Gaussian kernel
    const int half = win / 2;
    std::vector<double> kernel(win);
    double ksum = 0.0;
    for (int i = 0; i < win; ++i) {
        const double d = i - half;
        kernel[i] = std::exp(-d * d / (2.0 * params.ssim_sigma * params.ssim_sigma));
        ksum += kernel[i];
    }
    for (double& k : kernel) k /= ksum;

    // separable filtering of the five moment maps over valid positions
    const int vw = w - win + 1;  // valid output width after the horizontal pass
    const auto filter = [&](auto&& value) {
        std::vector<double> horiz(static_cast<size_t>(h) * vw);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < vw; ++c) {
                double acc = 0.0;
                for (int i = 0; i < win; ++i) acc += kernel[i] * value(r, c + i);
                horiz[static_cast<size_t>(r) * vw + c] = acc;
            }
        const int vh = h - win + 1;
        std::vector<double> out(static_cast<size_t>(vh) * vw);
        for (int r = 0; r < vh; ++r)
            for (int c = 0; c < vw; ++c) {
                double acc = 0.0;
                for (int i = 0; i < win; ++i) acc += kernel[i] * horiz[static_cast<size_t>(r + i) * vw + c];
                out[static_cast<size_t>(r) * vw + c] = acc;
            }
        return out;
    };

    const auto x = [&](int r, int c) { return clean.at(r, c); };
    const auto y = [&](int r, int c) { return estimate.at(r, c); };
    const auto mu_x = filter(x);
    const auto mu_y = filter(y);
    const auto xx = filter([&](int r, int c) { return x(r, c) * x(r, c); });
    const auto yy = filter([&](int r, int c) { return y(r, c) * y(r, c); });
    const auto xy = filter([&](int r, int c) { return x(r, c) * y(r, c); });

    double acc = 0.0;
    for (size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double var_x = xx[i] - mx * mx;
        const double var_y = yy[i] - my * my;
        const double cov = xy[i] - mx * my;
        acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (var_x + var_y + c2));
    }
    return acc / static_cast<double>(mu_x.size());
}

PhantomKind parse_phantom_kind(const std::string& name) {
    if (name == "shapes") return PhantomKind::SHAPES;
    if (name == "checker") return PhantomKind::CHECKER;
    if (name == "text") return PhantomKind::TEXT_LIKE;
    throw std::invalid_argument("unknown phantom kind: " + name);
}

std::string phantom_kind_name(PhantomKind kind) {
    switch (kind) {
        case PhantomKind::SHAPES: return "shapes";
        case PhantomKind::CHECKER: return "checker";
        case PhantomKind::TEXT_LIKE: return "text";
    }
    return "?";
}

}  // namespace sddql
