// Normalized cross-correlation against a fixed grayscale template.
#pragma once

#include "ebt/image.hpp"

namespace ebt {

struct NccTemplate {
    Image patch;  // grayscale canonical patch captured at frame 1
    double mean = 0.0;
    double stddev = 0.0;
};

inline NccTemplate make_ncc_template(const Image& frame, const BoundingBox& b, int patch_size) {
    NccTemplate t;
    t.patch = crop_resample(to_grayscale(frame), b, patch_size, patch_size);
    const std::size_t n = t.patch.pixels.size();
    double sum = 0.0, sum_sq = 0.0;
    for (std::uint8_t v : t.patch.pixels) {
        sum += v;
        sum_sq += static_cast<double>(v) * v;
    }
    t.mean = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - t.mean * t.mean;
    t.stddev = var > 0.0 ? std::sqrt(var) : 0.0;
    return t;
}

// rho in [-1, 1]; zero-variance candidates (or templates) correlate to 0.
inline double ncc(const Image& candidate, const NccTemplate& tmpl) {
    if (candidate.channels != 1 || candidate.width != tmpl.patch.width ||
        candidate.height != tmpl.patch.height)
        throw std::invalid_argument("ncc: candidate patch must match template size (gray)");
    if (tmpl.stddev <= 0.0) return 0.0;
    const std::size_t n = candidate.pixels.size();
    double sum = 0.0, sum_sq = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = candidate.pixels[i];
        sum += p;
        sum_sq += p * p;
        cross += p * tmpl.patch.pixels[i];
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - mean * mean;
    if (var <= 0.0) return 0.0;
    const double rho = (cross / static_cast<double>(n) - mean * tmpl.mean) /
                       (std::sqrt(var) * tmpl.stddev);
    return std::clamp(rho, -1.0, 1.0);
}

}  // namespace ebt
