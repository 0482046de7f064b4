// Spatial-pyramid intensity histograms: the candidate patch is resampled to
// a canonical square, split into L x L cells for levels 1..5, and each cell
// contributes one L1-normalized 16-bin histogram per RGB channel. Blocks are
// concatenated (level, cell row-major, channel R/G/B), giving
// (1 + 4 + 9 + 16 + 25) * 3 = 165 blocks and a 2640-D vector.
#pragma once

#include <vector>

#include "ebt/image.hpp"

namespace ebt {

using PatchFeature = std::vector<double>;

constexpr int kPyramidLevels = 5;
constexpr int kHistogramBins = 16;
constexpr int kFeatureBlocks = (1 + 4 + 9 + 16 + 25) * 3;            // 165
constexpr int kFeatureDim = kFeatureBlocks * kHistogramBins;          // 2640
constexpr int kDefaultPatchSize = 60;  // divisible by every level

inline PatchFeature extract_feature(const Image& img, const BoundingBox& b,
                                    int patch_size = kDefaultPatchSize) {
    if (!intersects_frame(b, img.width, img.height))
        throw std::invalid_argument("extract_feature: box outside frame");
    const Image patch = crop_resample(img, b, patch_size, patch_size);

    PatchFeature feature(kFeatureDim, 0.0);
    int counts[3][kHistogramBins];
    std::size_t offset = 0;
    for (int level = 1; level <= kPyramidLevels; ++level) {
        for (int cr = 0; cr < level; ++cr) {
            const int y0 = cr * patch_size / level;
            const int y1 = (cr + 1) * patch_size / level;
            for (int cc = 0; cc < level; ++cc) {
                const int x0 = cc * patch_size / level;
                const int x1 = (cc + 1) * patch_size / level;
                for (auto& ch : counts)
                    std::fill(std::begin(ch), std::end(ch), 0);
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        if (patch.channels == 3) {
                            counts[0][patch.at(x, y, 0) / 16]++;
                            counts[1][patch.at(x, y, 1) / 16]++;
                            counts[2][patch.at(x, y, 2) / 16]++;
                        } else {
                            const int bin = patch.at(x, y) / 16;
                            counts[0][bin]++;
                            counts[1][bin]++;
                            counts[2][bin]++;
                        }
                    }
                }
                const int total = (y1 - y0) * (x1 - x0);
                for (int c = 0; c < 3; ++c) {
                    if (total > 0) {
                        for (int bin = 0; bin < kHistogramBins; ++bin)
                            feature[offset + bin] =
                                static_cast<double>(counts[c][bin]) / total;
                    }
                    offset += kHistogramBins;
                }
            }
        }
    }
    return feature;
}

inline double intersection_kernel(const PatchFeature& a, const PatchFeature& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("intersection_kernel: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::min(a[i], b[i]);
    return sum;
}

}  // namespace ebt
