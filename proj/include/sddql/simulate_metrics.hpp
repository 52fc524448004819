#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sddql/image.hpp"

namespace sddql {

enum class PhantomKind { SHAPES, CHECKER, TEXT_LIKE };

struct PhantomSpec {
    PhantomKind kind = PhantomKind::SHAPES;
    int size = 256;
    std::vector<double> levels = {500.0, 3000.0, 8000.0};  // region reflectivities
    uint64_t seed = 0;
};

struct SpeckleSpec {
    double looks = 1.0;  // number of looks L; L=1 is single-look exponential speckle
    uint64_t seed = 0;
};

struct MetricParams {
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 0.0;  // <= 0 means: use max-min of the clean image
};

struct Phantom {
    Image image;
    std::vector<int> region;  // per-pixel region id, for diagnostics
};

Phantom generate_phantom(const PhantomSpec& spec);

// Multiplicative speckle: g_p = f_p * n_p, n_p ~ Gamma(shape=L, scale=1/L), unit mean.
Image apply_speckle(const Image& clean, const SpeckleSpec& spec);

// Deterministic unit-mean gamma sampler used by apply_speckle; exposed for
// distribution tests.
class GammaSampler {
  public:
    GammaSampler(double shape, uint64_t seed);
    double sample();  // Gamma(shape, 1/shape): mean 1, variance 1/shape

  private:
    double shape_;
    std::mt19937_64 rng_;
    double next_uniform();  // (0,1)
    double next_normal();   // Box-Muller, cached pair
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// 10*log10( sum clean^2 / sum (clean-estimate)^2 ); +infinity when the error is zero.
double snr_db(const Image& clean, const Image& estimate);

// Mean local SSIM over Gaussian-weighted windows at valid (fully interior) positions.
double ssim(const Image& clean, const Image& estimate, const MetricParams& params = {});

PhantomKind parse_phantom_kind(const std::string& name);  // "shapes" | "checker" | "text"
std::string phantom_kind_name(PhantomKind kind);

}  // namespace sddql
