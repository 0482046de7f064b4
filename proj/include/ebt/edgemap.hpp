// Per-frame edge analysis: Sobel gradients, non-maximal suppression, greedy
// edge grouping with a turn budget, and inter-group affinities. The result
// (EdgeStructures) also carries integral images and row/column run indices
// so that box scoring touches only the groups near a box boundary.
//
// Orientation convention: the per-pixel orientation map stores the gradient
// direction folded into [0, pi). Edge tangents are perpendicular to it; the
// per-group mean orientation stored in EdgeGroup is the tangent direction,
// which is what the affinity formula expects.
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <utility>
#include <vector>

#include "ebt/image.hpp"

namespace ebt {

struct EdgeConfig {
    double grouping_threshold = 0.1;                       // tau_e
    double turn_budget = std::numbers::pi / 2.0;           // walk termination
    double affinity_gamma = 2.0;
    double affinity_floor = 0.05;
};

struct GradientMaps {
    int width = 0;
    int height = 0;
    std::vector<double> magnitude;    // in [0, 1]
    std::vector<double> orientation;  // gradient direction in [0, pi)
};

struct EdgeGroup {
    std::vector<int> pixels;   // linear indices y * width + x, in walk order
    double magnitude_sum = 0.0;
    double mean_x = 0.0;
    double mean_y = 0.0;
    double orientation = 0.0;  // mean edge tangent in [0, pi)
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    int rep_x = 0, rep_y = 0;  // last walked pixel; carries the group mass in
                               // the integral image
};

namespace detail {

inline double fold_half_circle(double a) {
    const double pi = std::numbers::pi;
    a = std::fmod(a, pi);
    if (a < 0.0) a += pi;
    if (a >= pi) a = 0.0;
    return a;
}

// Angular distance between two orientations on the half circle [0, pi).
inline double orientation_distance(double a, double b) {
    double d = std::fabs(a - b);
    if (d > std::numbers::pi / 2.0) d = std::numbers::pi - d;
    return d;
}

}  // namespace detail

// 3x3 Sobel with replicated borders. Magnitudes are normalized by the
// largest representable response (4 * 255 per axis, combined in quadrature)
// so they always land in [0, 1].
inline GradientMaps compute_gradients(const Image& gray) {
    if (gray.channels != 1)
        throw std::invalid_argument("compute_gradients: single-channel image required");
    const int w = gray.width, h = gray.height;
    GradientMaps maps;
    maps.width = w;
    maps.height = h;
    maps.magnitude.assign(static_cast<std::size_t>(w) * h, 0.0);
    maps.orientation.assign(static_cast<std::size_t>(w) * h, 0.0);

    const double norm = 4.0 * 255.0 * std::numbers::sqrt2;
    auto px = [&](int x, int y) -> int {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return gray.pixels[static_cast<std::size_t>(y) * w + x];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int gx = -px(x - 1, y - 1) + px(x + 1, y - 1) - 2 * px(x - 1, y) +
                           2 * px(x + 1, y) - px(x - 1, y + 1) + px(x + 1, y + 1);
            const int gy = -px(x - 1, y - 1) - 2 * px(x, y - 1) - px(x + 1, y - 1) +
                           px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1);
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            maps.magnitude[i] = std::hypot(static_cast<double>(gx), static_cast<double>(gy)) / norm;
            if (gx != 0 || gy != 0)
                maps.orientation[i] =
                    detail::fold_half_circle(std::atan2(static_cast<double>(gy), static_cast<double>(gx)));
        }
    }
    return maps;
}

// Thinning: a pixel survives only if its magnitude is >= both neighbors
// sampled along the (quantized) gradient direction. Out-of-bounds neighbors
// count as zero.
inline std::vector<double> nms_edges(const GradientMaps& maps) {
    const int w = maps.width, h = maps.height;
    std::vector<double> thinned(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double m = maps.magnitude[i];
            if (m <= 0.0) continue;
            const double o = maps.orientation[i];
            const int dx = static_cast<int>(std::lround(std::cos(o)));
            const int dy = static_cast<int>(std::lround(std::sin(o)));
            auto neighbor = [&](int nx, int ny) -> double {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) return 0.0;
                return maps.magnitude[static_cast<std::size_t>(ny) * w + nx];
            };
            if (m >= neighbor(x + dx, y + dy) && m >= neighbor(x - dx, y - dy))
                thinned[i] = m;
        }
    }
    return thinned;
}

// Greedy 8-connected walks over thinned edge pixels. Each walk keeps
// extending to the unassigned neighbor with the smallest orientation change
// and stops once the accumulated change would reach the turn budget. Every
// pixel above the grouping threshold ends up in exactly one group.
inline std::vector<EdgeGroup> group_edges(const std::vector<double>& thinned,
                                          const std::vector<double>& orientation, int width,
                                          int height, const EdgeConfig& cfg = {}) {
    static constexpr int kNbrX[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    static constexpr int kNbrY[8] = {-1, -1, -1, 0, 0, 1, 1, 1};

    std::vector<int> assigned(static_cast<std::size_t>(width) * height, -1);
    std::vector<EdgeGroup> groups;

    auto is_edge = [&](int x, int y) {
        return thinned[static_cast<std::size_t>(y) * width + x] > cfg.grouping_threshold;
    };

    for (int sy = 0; sy < height; ++sy) {
        for (int sx = 0; sx < width; ++sx) {
            const std::size_t seed = static_cast<std::size_t>(sy) * width + sx;
            if (assigned[seed] >= 0 || !is_edge(sx, sy)) continue;

            const int gid = static_cast<int>(groups.size());
            EdgeGroup g;
            int cx = sx, cy = sy;
            assigned[seed] = gid;
            g.pixels.push_back(static_cast<int>(seed));
            double turn = 0.0;
            for (;;) {
                const double cur_o = orientation[static_cast<std::size_t>(cy) * width + cx];
                int best = -1;
                double best_d = 0.0;
                for (int k = 0; k < 8; ++k) {
                    const int nx = cx + kNbrX[k], ny = cy + kNbrY[k];
                    if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny) * width + nx;
                    if (assigned[ni] >= 0 || !is_edge(nx, ny)) continue;
                    const double d = detail::orientation_distance(cur_o, orientation[ni]);
                    if (best < 0 || d < best_d) {
                        best = k;
                        best_d = d;
                    }
                }
                if (best < 0) break;
                if (turn + best_d >= cfg.turn_budget - 1e-12) break;
                turn += best_d;
                cx += kNbrX[best];
                cy += kNbrY[best];
                const std::size_t ci = static_cast<std::size_t>(cy) * width + cx;
                assigned[ci] = gid;
                g.pixels.push_back(static_cast<int>(ci));
            }

            g.min_x = width;
            g.min_y = height;
            g.max_x = g.max_y = 0;
            double sum_x = 0.0, sum_y = 0.0, sum_sin = 0.0, sum_cos = 0.0;
            for (int p : g.pixels) {
                const int x = p % width, y = p / width;
                g.magnitude_sum += thinned[static_cast<std::size_t>(p)];
                sum_x += x;
                sum_y += y;
                const double tangent = detail::fold_half_circle(
                    orientation[static_cast<std::size_t>(p)] + std::numbers::pi / 2.0);
                sum_sin += std::sin(2.0 * tangent);
                sum_cos += std::cos(2.0 * tangent);
                g.min_x = std::min(g.min_x, x);
                g.min_y = std::min(g.min_y, y);
                g.max_x = std::max(g.max_x, x);
                g.max_y = std::max(g.max_y, y);
            }
            const double n = static_cast<double>(g.pixels.size());
            g.mean_x = sum_x / n;
            g.mean_y = sum_y / n;
            g.orientation = detail::fold_half_circle(0.5 * std::atan2(sum_sin, sum_cos));
            g.rep_x = g.pixels.back() % width;
            g.rep_y = g.pixels.back() / width;
            groups.push_back(std::move(g));
        }
    }
    return groups;
}

// Sparse symmetric affinities between groups whose member pixels come within
// a 2-pixel (Chebyshev) window of each other. Pairs below the floor are
// dropped; a(i, i) is implicitly 1.
inline std::vector<std::vector<std::pair<int, double>>> group_affinities(
    const std::vector<EdgeGroup>& groups, int width, int height, const EdgeConfig& cfg = {}) {
    std::vector<int> pixel_group(static_cast<std::size_t>(width) * height, -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (int p : groups[g].pixels) pixel_group[static_cast<std::size_t>(p)] = static_cast<int>(g);

    std::vector<std::vector<std::pair<int, double>>> aff(groups.size());
    auto already_linked = [&](int a, int b) {
        for (const auto& e : aff[a])
            if (e.first == b) return true;
        return false;
    };

    const int rad = 2;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int s0 = pixel_group[static_cast<std::size_t>(y) * width + x];
            if (s0 < 0) continue;
            for (int dy = -rad; dy <= rad; ++dy) {
                for (int dx = -rad; dx <= rad; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
                    const int s1 = pixel_group[static_cast<std::size_t>(ny) * width + nx];
                    if (s1 <= s0) continue;  // each unordered pair once
                    if (already_linked(s0, s1)) continue;
                    const double theta_ij = detail::fold_half_circle(
                        std::atan2(groups[s1].mean_y - groups[s0].mean_y,
                                   groups[s1].mean_x - groups[s0].mean_x));
                    double a = std::fabs(std::cos(groups[s0].orientation - theta_ij) *
                                         std::cos(groups[s1].orientation - theta_ij));
                    a = std::pow(a, cfg.affinity_gamma);
                    if (a < cfg.affinity_floor) continue;
                    aff[s0].emplace_back(s1, a);
                    aff[s1].emplace_back(s0, a);
                }
            }
        }
    }
    return aff;
}

struct EdgeStructures {
    int width = 0;
    int height = 0;
    EdgeConfig config;
    std::vector<double> magnitude;    // thinned
    std::vector<double> orientation;  // gradient direction in [0, pi)
    std::vector<EdgeGroup> groups;
    std::vector<int> pixel_group;     // -1 = no group
    std::vector<std::vector<std::pair<int, double>>> affinities;

    // Scoring accelerators. group_mass_ii integrates each group's total
    // magnitude placed at its representative pixel; edge_mag_ii integrates
    // the thinned magnitude of grouped pixels. Row/column runs compress the
    // group-id map so a box boundary can be scanned in O(#runs).
    std::vector<double> group_mass_ii;  // (width + 1) * (height + 1)
    std::vector<double> edge_mag_ii;
    std::vector<std::vector<int>> row_runs, col_runs;
    std::vector<int> row_run_idx, col_run_idx;

    double affinity(int i, int j) const {
        if (i == j) return 1.0;
        for (const auto& e : affinities[static_cast<std::size_t>(i)])
            if (e.first == j) return e.second;
        return 0.0;
    }

    double group_mass_in(int x0, int y0, int x1, int y1) const {
        return rect_sum(group_mass_ii, x0, y0, x1, y1);
    }
    double edge_mag_in(int x0, int y0, int x1, int y1) const {
        return rect_sum(edge_mag_ii, x0, y0, x1, y1);
    }

private:
    double rect_sum(const std::vector<double>& ii, int x0, int y0, int x1, int y1) const {
        const int stride = width + 1;
        return ii[static_cast<std::size_t>(y1 + 1) * stride + (x1 + 1)] -
               ii[static_cast<std::size_t>(y0) * stride + (x1 + 1)] -
               ii[static_cast<std::size_t>(y1 + 1) * stride + x0] +
               ii[static_cast<std::size_t>(y0) * stride + x0];
    }
};

inline EdgeStructures build_edge_structures(const std::vector<double>& thinned,
                                            const std::vector<double>& orientation, int width,
                                            int height, const EdgeConfig& cfg = {}) {
    EdgeStructures es;
    es.width = width;
    es.height = height;
    es.config = cfg;
    es.magnitude = thinned;
    es.orientation = orientation;
    es.groups = group_edges(thinned, orientation, width, height, cfg);
    es.affinities = group_affinities(es.groups, width, height, cfg);

    es.pixel_group.assign(static_cast<std::size_t>(width) * height, -1);
    for (std::size_t g = 0; g < es.groups.size(); ++g)
        for (int p : es.groups[g].pixels)
            es.pixel_group[static_cast<std::size_t>(p)] = static_cast<int>(g);

    const int stride = width + 1;
    es.group_mass_ii.assign(static_cast<std::size_t>(stride) * (height + 1), 0.0);
    es.edge_mag_ii.assign(static_cast<std::size_t>(stride) * (height + 1), 0.0);
    std::vector<double> mass(static_cast<std::size_t>(width) * height, 0.0);
    for (const auto& g : es.groups)
        mass[static_cast<std::size_t>(g.rep_y) * width + g.rep_x] += g.magnitude_sum;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            const std::size_t o = static_cast<std::size_t>(y + 1) * stride + (x + 1);
            const double grouped_mag = es.pixel_group[i] >= 0 ? thinned[i] : 0.0;
            es.group_mass_ii[o] = mass[i] + es.group_mass_ii[o - 1] +
                                  es.group_mass_ii[o - stride] - es.group_mass_ii[o - stride - 1];
            es.edge_mag_ii[o] = grouped_mag + es.edge_mag_ii[o - 1] +
                                es.edge_mag_ii[o - stride] - es.edge_mag_ii[o - stride - 1];
        }
    }

    es.row_runs.resize(static_cast<std::size_t>(height));
    es.row_run_idx.assign(static_cast<std::size_t>(width) * height, 0);
    for (int y = 0; y < height; ++y) {
        int prev = -2;
        for (int x = 0; x < width; ++x) {
            const int g = es.pixel_group[static_cast<std::size_t>(y) * width + x];
            if (g != prev) {
                es.row_runs[static_cast<std::size_t>(y)].push_back(g);
                prev = g;
            }
            es.row_run_idx[static_cast<std::size_t>(y) * width + x] =
                static_cast<int>(es.row_runs[static_cast<std::size_t>(y)].size()) - 1;
        }
    }
    es.col_runs.resize(static_cast<std::size_t>(width));
    es.col_run_idx.assign(static_cast<std::size_t>(width) * height, 0);
    for (int x = 0; x < width; ++x) {
        int prev = -2;
        for (int y = 0; y < height; ++y) {
            const int g = es.pixel_group[static_cast<std::size_t>(y) * width + x];
            if (g != prev) {
                es.col_runs[static_cast<std::size_t>(x)].push_back(g);
                prev = g;
            }
            es.col_run_idx[static_cast<std::size_t>(y) * width + x] =
                static_cast<int>(es.col_runs[static_cast<std::size_t>(x)].size()) - 1;
        }
    }
    return es;
}

inline EdgeStructures build_edge_structures(const Image& frame, const EdgeConfig& cfg = {}) {
    const Image gray = to_grayscale(frame);
    const GradientMaps maps = compute_gradients(gray);
    const std::vector<double> thinned = nms_edges(maps);
    return build_edge_structures(thinned, maps.orientation, maps.width, maps.height, cfg);
}

// Debug dumps for fixture diffing.
inline void save_edge_map_pgm(const EdgeStructures& es, const std::string& path) {
    Image img(es.width, es.height, 1);
    for (std::size_t i = 0; i < es.magnitude.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(
            std::clamp(std::lround(es.magnitude[i] * 255.0), 0l, 255l));
    save_pnm(img, path);
}

inline void save_groups_csv(const EdgeStructures& es, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write groups csv: " + path);
    out << "group,size,magnitude_sum,mean_x,mean_y,orientation\n";
    char buf[160];
    for (std::size_t g = 0; g < es.groups.size(); ++g) {
        const auto& grp = es.groups[g];
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9g,%.9g,%.9g,%.9g\n", g, grp.pixels.size(),
                      grp.magnitude_sum, grp.mean_x, grp.mean_y, grp.orientation);
        out << buf;
    }
}

}  // namespace ebt
