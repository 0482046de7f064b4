// Whole-frame candidate generation and edge-based objectness scoring.
//
// A box's score is the summed magnitude of edge groups wholly enclosed by
// it, each discounted by the strongest affinity chain connecting it to a
// group that straddles the box boundary, minus the edge magnitude inside a
// centered half-size sub-box, normalized by 2 * (w + h)^1.5. Scores are
// clamped at zero.
#pragma once

#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <vector>

#include "ebt/edgemap.hpp"
#include "ebt/rng.hpp"

namespace ebt {

struct ScoredBox {
    BoundingBox box;
    double objectness = 0.0;
    double rerank_score = 0.0;  // filled by the re-ranker
};

struct ProposalConfig {
    double alpha = 0.85;             // sliding-window sampling step
    double nms_beta = 0.8;           // NMS IoU threshold
    double min_area_ratio = 0.5;     // relative to the previous box area
    double max_area_ratio = 2.0;
    double objectness_floor = 0.005; // e_T
    int max_proposals = 200;         // H
    double local_radius = 30.0;      // local sampling disc, pixels
    int local_count = 80;
    int aspect_steps = 4;            // geometric size steps per dimension
};

namespace detail {

constexpr double kScaleExponent = 1.5;  // kappa

struct ScoreScratch {
    std::vector<int> stamp;      // per group: id of the box that last saw it
    std::vector<int> slot;       // per group: index into the active arrays
    std::vector<int> ids;        // active groups for the current box
    std::vector<double> weights; // chain weight per active entry
    std::vector<char> straddler;
    int box_id = 0;
};

inline ScoreScratch& score_scratch() {
    thread_local ScoreScratch s;
    return s;
}

}  // namespace detail

// Objectness score of a single box against the frame's edge structures.
// Degenerate boxes (either side under 2 px after clamping) score 0.
inline double score_box(const BoundingBox& box, const EdgeStructures& es) {
    if (box.w < 2.0 || box.h < 2.0) return 0.0;
    if (!intersects_frame(box, es.width, es.height)) return 0.0;
    const BoundingBox b = clamp_into_frame(box, es.width, es.height);
    if (b.w < 2.0 || b.h < 2.0) return 0.0;

    const int x0 = std::clamp(static_cast<int>(std::lround(b.x)), 0, es.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::lround(b.y)), 0, es.height - 1);
    const int x1 = std::clamp(static_cast<int>(std::lround(b.x2())) - 1, x0, es.width - 1);
    const int y1 = std::clamp(static_cast<int>(std::lround(b.y2())) - 1, y0, es.height - 1);

    double v = es.group_mass_in(x0, y0, x1, y1);

    auto& scratch = detail::score_scratch();
    if (scratch.stamp.size() < es.groups.size()) {
        scratch.stamp.assign(es.groups.size(), -1);
        scratch.slot.assign(es.groups.size(), 0);
    }
    scratch.ids.clear();
    scratch.weights.clear();
    scratch.straddler.clear();
    const int id = ++scratch.box_id;

    if (v > 0.0 && !es.groups.empty()) {
        // Groups intersecting the four boundary lines. A group straddles the
        // boundary iff its pixel bounding box is not contained in the box.
        auto visit = [&](int g) {
            if (g < 0 || scratch.stamp[static_cast<std::size_t>(g)] == id) return;
            scratch.stamp[static_cast<std::size_t>(g)] = id;
            const auto& grp = es.groups[static_cast<std::size_t>(g)];
            const bool inside = grp.min_x >= x0 && grp.max_x <= x1 && grp.min_y >= y0 &&
                                grp.max_y <= y1;
            if (inside) {
                scratch.stamp[static_cast<std::size_t>(g)] = -1;  // reachable via chains only
                return;
            }
            scratch.slot[static_cast<std::size_t>(g)] = static_cast<int>(scratch.ids.size());
            scratch.ids.push_back(g);
            scratch.weights.push_back(1.0);
            scratch.straddler.push_back(1);
        };
        auto scan_row = [&](int y) {
            const auto& runs = es.row_runs[static_cast<std::size_t>(y)];
            const int r0 = es.row_run_idx[static_cast<std::size_t>(y) * es.width + x0];
            const int r1 = es.row_run_idx[static_cast<std::size_t>(y) * es.width + x1];
            for (int r = r0; r <= r1; ++r) visit(runs[static_cast<std::size_t>(r)]);
        };
        auto scan_col = [&](int x) {
            const auto& runs = es.col_runs[static_cast<std::size_t>(x)];
            const int r0 = es.col_run_idx[static_cast<std::size_t>(y0) * es.width + x];
            const int r1 = es.col_run_idx[static_cast<std::size_t>(y1) * es.width + x];
            for (int r = r0; r <= r1; ++r) visit(runs[static_cast<std::size_t>(r)]);
        };
        scan_row(y0);
        scan_row(y1);
        scan_col(x0);
        scan_col(x1);

        // Propagate chain weights from straddlers to enclosed groups whose
        // representative pixel lies in the box, pruning products below the
        // affinity floor. Rewinding on improvement mirrors a best-first pass.
        const double floor = es.config.affinity_floor;
        for (int i = 0; i < static_cast<int>(scratch.ids.size()); ++i) {
            const double w_cur = scratch.weights[static_cast<std::size_t>(i)];
            const int g = scratch.ids[static_cast<std::size_t>(i)];
            for (const auto& [q, a] : es.affinities[static_cast<std::size_t>(g)]) {
                const double wq = w_cur * a;
                if (wq < floor) continue;
                if (scratch.stamp[static_cast<std::size_t>(q)] == id) {
                    const int s = scratch.slot[static_cast<std::size_t>(q)];
                    if (!scratch.straddler[static_cast<std::size_t>(s)] &&
                        wq > scratch.weights[static_cast<std::size_t>(s)]) {
                        scratch.weights[static_cast<std::size_t>(s)] = wq;
                        i = std::min(i, s - 1);
                    }
                } else {
                    const auto& grp = es.groups[static_cast<std::size_t>(q)];
                    if (grp.rep_x >= x0 && grp.rep_x <= x1 && grp.rep_y >= y0 &&
                        grp.rep_y <= y1) {
                        scratch.stamp[static_cast<std::size_t>(q)] = id;
                        scratch.slot[static_cast<std::size_t>(q)] =
                            static_cast<int>(scratch.ids.size());
                        scratch.ids.push_back(q);
                        scratch.weights.push_back(wq);
                        scratch.straddler.push_back(0);
                    }
                }
            }
        }

        for (std::size_t i = 0; i < scratch.ids.size(); ++i) {
            const auto& grp = es.groups[static_cast<std::size_t>(scratch.ids[i])];
            if (scratch.straddler[i]) {
                if (grp.rep_x >= x0 && grp.rep_x <= x1 && grp.rep_y >= y0 && grp.rep_y <= y1)
                    v -= grp.magnitude_sum;
            } else {
                v -= scratch.weights[i] * grp.magnitude_sum;
            }
        }
    }

    // Subtract the edge magnitude inside the centered half-size sub-box.
    const int wpx = x1 - x0 + 1, hpx = y1 - y0 + 1;
    const int cw = wpx / 2, ch = hpx / 2;
    if (cw >= 1 && ch >= 1) {
        const int cx0 = x0 + (wpx - cw) / 2;
        const int cy0 = y0 + (hpx - ch) / 2;
        v -= es.edge_mag_in(cx0, cy0, cx0 + cw - 1, cy0 + ch - 1);
    }

    if (v <= 0.0) return 0.0;
    return v / (2.0 * std::pow(b.w + b.h, detail::kScaleExponent));
}

// All sliding-window candidates around the previous box size: widths and
// heights on an independent geometric grid prev * alpha^k, |k| <= aspect_steps,
// filtered to the configured area band, striding the frame with step
// (1 - alpha) * min(w, h). Returns an empty list when nothing fits.
inline std::vector<BoundingBox> generate_candidates(const BoundingBox& prev, int frame_w,
                                                    int frame_h, const ProposalConfig& cfg) {
    if (!(prev.area() > 0.0))
        throw std::invalid_argument("generate_candidates: previous box has no area");

    std::vector<std::pair<int, int>> sizes;
    for (int kw = -cfg.aspect_steps; kw <= cfg.aspect_steps; ++kw) {
        const int w = static_cast<int>(std::lround(prev.w * std::pow(cfg.alpha, kw)));
        for (int kh = -cfg.aspect_steps; kh <= cfg.aspect_steps; ++kh) {
            const int h = static_cast<int>(std::lround(prev.h * std::pow(cfg.alpha, kh)));
            if (w < 2 || h < 2 || w > frame_w || h > frame_h) continue;
            const double area = static_cast<double>(w) * h;
            if (area < cfg.min_area_ratio * prev.area() || area > cfg.max_area_ratio * prev.area())
                continue;
            sizes.emplace_back(w, h);
        }
    }
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

    std::vector<BoundingBox> out;
    for (const auto& [w, h] : sizes) {
        const double delta = std::max(1.0, (1.0 - cfg.alpha) * std::min(w, h));
        std::vector<int> xs, ys;
        for (int k = 0;; ++k) {
            const double pos = k * delta;
            if (pos >= frame_w) break;
            const int x = std::min(static_cast<int>(std::lround(pos)), frame_w - w);
            if (xs.empty() || xs.back() != x) xs.push_back(x);
            if (x == frame_w - w) break;
        }
        for (int k = 0;; ++k) {
            const double pos = k * delta;
            if (pos >= frame_h) break;
            const int y = std::min(static_cast<int>(std::lround(pos)), frame_h - h);
            if (ys.empty() || ys.back() != y) ys.push_back(y);
            if (y == frame_h - h) break;
        }
        for (int y : ys)
            for (int x : xs)
                out.emplace_back(static_cast<double>(x), static_cast<double>(y),
                                 static_cast<double>(w), static_cast<double>(h));
    }
    return out;
}

// Greedy descending-score NMS. A box survives iff its IoU with every
// already-kept box is <= beta. Output stays in descending-score order with
// deterministic tie-breaking (smaller area, then position). Log-area binning
// only skips pairs whose IoU provably cannot exceed beta.
inline std::vector<ScoredBox> nms_boxes(std::vector<ScoredBox> scored, double beta) {
    std::sort(scored.begin(), scored.end(), [](const ScoredBox& a, const ScoredBox& b) {
        if (a.objectness != b.objectness) return a.objectness > b.objectness;
        return tie_before(a.box, b.box);
    });
    if (scored.empty()) return scored;

    const double bin_width = std::log(1.0 / beta);
    std::unordered_map<int, std::vector<int>> bins;  // bin -> kept indices
    std::vector<ScoredBox> kept;
    kept.reserve(scored.size());
    for (const auto& sb : scored) {
        const int bin = static_cast<int>(std::floor(std::log(std::max(sb.box.area(), 1e-9)) / bin_width));
        bool keep = true;
        for (int d = -1; d <= 1 && keep; ++d) {
            auto it = bins.find(bin + d);
            if (it == bins.end()) continue;
            for (int k : it->second) {
                if (iou(sb.box, kept[static_cast<std::size_t>(k)].box) > beta) {
                    keep = false;
                    break;
                }
            }
        }
        if (keep) {
            bins[bin].push_back(static_cast<int>(kept.size()));
            kept.push_back(sb);
        }
    }
    return kept;
}

// Thresholded, NMS-filtered whole-frame proposal pool (the pool handed to
// the re-ranker; truncation to H happens only after re-ranking).
inline std::vector<ScoredBox> propose(const EdgeStructures& es, const BoundingBox& prev,
                                      const ProposalConfig& cfg) {
    std::vector<ScoredBox> scored;
    for (const BoundingBox& b : generate_candidates(prev, es.width, es.height, cfg)) {
        const double s = score_box(b, es);
        if (s >= cfg.objectness_floor) scored.push_back({b, s, 0.0});
    }
    return nms_boxes(std::move(scored), cfg.nms_beta);
}

// Local candidate set: boxes of the previous size with centers drawn
// uniformly from a disc around the previous center, clamped to the frame.
inline std::vector<BoundingBox> sample_local(const BoundingBox& prev, int frame_w, int frame_h,
                                             const ProposalConfig& cfg, Rng& rng) {
    std::vector<BoundingBox> out;
    out.reserve(static_cast<std::size_t>(cfg.local_count));
    const double r = cfg.local_radius;
    for (int i = 0; i < cfg.local_count; ++i) {
        double dx, dy;
        do {
            dx = rng.uniform(-r, r);
            dy = rng.uniform(-r, r);
        } while (dx * dx + dy * dy > r * r);
        BoundingBox b(prev.cx() + dx - 0.5 * prev.w, prev.cy() + dy - 0.5 * prev.h, prev.w,
                      prev.h);
        out.push_back(clamp_into_frame(b, frame_w, frame_h));
    }
    return out;
}

inline void save_proposals_csv(const std::vector<ScoredBox>& boxes, const std::string& path,
                               bool include_rerank = false) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write proposals csv: " + path);
    out << (include_rerank ? "x,y,w,h,objectness,rerank_score\n" : "x,y,w,h,objectness\n");
    char buf[192];
    for (const auto& sb : boxes) {
        if (include_rerank)
            std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f,%.9g,%.9g\n", sb.box.x,
                          sb.box.y, sb.box.w, sb.box.h, sb.objectness, sb.rerank_score);
        else
            std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f,%.9g\n", sb.box.x, sb.box.y,
                          sb.box.w, sb.box.h, sb.objectness);
        out << buf;
    }
}

}  // namespace ebt
