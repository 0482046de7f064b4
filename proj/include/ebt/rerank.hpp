// Instance-specific proposal re-ranking: a 10-D feature of objectness scores
// over a Haar-like partition of each candidate, scored by an online linear
// SVM trained with Pegasos-style stochastic subgradient steps. The model is
// initialized on frame 1 from the top proposals and refreshed every few
// frames; proposals are reordered by the model and truncated to the top H.
#pragma once

#include <array>
#include <fstream>
#include <sstream>

#include "ebt/objectness.hpp"

namespace ebt {

constexpr int kRerankDim = 10;
using RerankFeature = std::array<double, kRerankDim>;

struct RerankConfig {
    double lambda = 1e-3;       // Pegasos regularization
    int init_epochs = 50;
    int update_epochs = 5;
    int update_period = 5;      // frames between model refreshes
    double neg_overlap = 0.5;   // IoU below which a pool box is a negative
    int layout_version = 1;     // partition layout; only version 1 exists
};

// Partition layout (version 1): full box, left/right halves, top/bottom
// halves, the four quadrants (TL, TR, BL, BR), and a centered half-size box.
inline std::array<BoundingBox, kRerankDim> partition_box(const BoundingBox& b) {
    const double hw = 0.5 * b.w, hh = 0.5 * b.h;
    return {
        b,
        BoundingBox(b.x, b.y, hw, b.h),             // left half
        BoundingBox(b.x + hw, b.y, hw, b.h),        // right half
        BoundingBox(b.x, b.y, b.w, hh),             // top half
        BoundingBox(b.x, b.y + hh, b.w, hh),        // bottom half
        BoundingBox(b.x, b.y, hw, hh),              // quadrants
        BoundingBox(b.x + hw, b.y, hw, hh),
        BoundingBox(b.x, b.y + hh, hw, hh),
        BoundingBox(b.x + hw, b.y + hh, hw, hh),
        BoundingBox(b.x + 0.5 * hw, b.y + 0.5 * hh, hw, hh),  // centered half box
    };
}

// Component i is the objectness of sub-box i; sub-boxes under 2 px in either
// dimension contribute 0 (score_box's degenerate rule).
inline RerankFeature rerank_feature(const BoundingBox& b, const EdgeStructures& es) {
    RerankFeature f{};
    const auto parts = partition_box(b);
    for (int i = 0; i < kRerankDim; ++i) f[static_cast<std::size_t>(i)] = score_box(parts[static_cast<std::size_t>(i)], es);
    return f;
}

class RerankModel {
public:
    RerankModel(const RerankConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
        weights_.fill(0.0);
        if (cfg.layout_version != 1)
            throw std::invalid_argument("rerank: unknown partition layout version");
    }

    double score(const RerankFeature& f) const {
        double s = bias_;
        for (int i = 0; i < kRerankDim; ++i) s += weights_[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
        return s;
    }

    // Regularized objective the trainer descends: lambda/2 ||w||^2 plus the
    // mean hinge loss. The bias is unregularized.
    double objective(const RerankFeature& positive,
                     const std::vector<RerankFeature>& negatives) const {
        double norm2 = 0.0;
        for (double w : weights_) norm2 += w * w;
        double hinge = std::max(0.0, 1.0 - score(positive));
        for (const auto& f : negatives) hinge += std::max(0.0, 1.0 + score(f));
        return 0.5 * cfg_.lambda * norm2 + hinge / (1.0 + static_cast<double>(negatives.size()));
    }

    void train(const RerankFeature& positive, const std::vector<RerankFeature>& negatives,
               int epochs) {
        if (negatives.empty()) return;
        objective_trace_.clear();
        objective_trace_.push_back(objective(positive, negatives));
        std::vector<int> order(negatives.size() + 1);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i) - 1;
        for (int e = 0; e < epochs; ++e) {
            rng_.shuffle(order);
            for (int idx : order) {
                const RerankFeature& x = idx < 0 ? positive : negatives[static_cast<std::size_t>(idx)];
                const double y = idx < 0 ? 1.0 : -1.0;
                step_++;
                const double eta = 1.0 / (cfg_.lambda * static_cast<double>(step_));
                const double margin = y * score(x);
                const double decay = 1.0 - eta * cfg_.lambda;
                for (double& w : weights_) w *= decay;
                if (margin < 1.0) {
                    for (int i = 0; i < kRerankDim; ++i)
                        weights_[static_cast<std::size_t>(i)] += eta * y * x[static_cast<std::size_t>(i)];
                    bias_ += eta * y;
                }
                // project onto the ball of radius 1/sqrt(lambda)
                double norm2 = 0.0;
                for (double w : weights_) norm2 += w * w;
                const double limit2 = 1.0 / cfg_.lambda;
                if (norm2 > limit2) {
                    const double scale = std::sqrt(limit2 / norm2);
                    for (double& w : weights_) w *= scale;
                }
            }
            objective_trace_.push_back(objective(positive, negatives));
        }
    }

    const std::array<double, kRerankDim>& weights() const { return weights_; }
    double bias() const { return bias_; }
    std::int64_t step_count() const { return step_; }
    const RerankConfig& config() const { return cfg_; }
    // objective at epoch boundaries of the last train() call (entry 0 = before)
    const std::vector<double>& objective_trace() const { return objective_trace_; }

    void save(std::ostream& out) const {
        out << "ebt-rerank-model v1\n";
        char buf[64];
        for (double w : weights_) {
            std::snprintf(buf, sizeof(buf), "%.17g\n", w);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g\n", bias_);
        out << buf;
        out << step_ << "\n";
    }

    void load(std::istream& in) {
        std::string line;
        if (!std::getline(in, line) || line != "ebt-rerank-model v1")
            throw std::runtime_error("rerank model: bad header");
        for (double& w : weights_)
            if (!(in >> w)) throw std::runtime_error("rerank model: truncated weights");
        if (!(in >> bias_ >> step_)) throw std::runtime_error("rerank model: truncated record");
    }

private:
    RerankConfig cfg_;
    Rng rng_;
    std::array<double, kRerankDim> weights_{};
    double bias_ = 0.0;
    std::int64_t step_ = 0;
    std::vector<double> objective_trace_;
};

inline std::vector<ScoredBox> top_by_objectness(std::vector<ScoredBox> pool, int h) {
    std::sort(pool.begin(), pool.end(), [](const ScoredBox& a, const ScoredBox& b) {
        if (a.objectness != b.objectness) return a.objectness > b.objectness;
        return tie_before(a.box, b.box);
    });
    if (static_cast<int>(pool.size()) > h) pool.resize(static_cast<std::size_t>(h));
    return pool;
}

// Scores every pool box with the model and returns the top H, descending.
// Ties fall back to objectness, then the usual box ordering.
inline std::vector<ScoredBox> rerank_select(const std::vector<ScoredBox>& pool,
                                            const RerankModel& model, const EdgeStructures& es,
                                            int h) {
    std::vector<ScoredBox> scored = pool;
    for (auto& sb : scored) sb.rerank_score = model.score(rerank_feature(sb.box, es));
    std::sort(scored.begin(), scored.end(), [](const ScoredBox& a, const ScoredBox& b) {
        if (a.rerank_score != b.rerank_score) return a.rerank_score > b.rerank_score;
        if (a.objectness != b.objectness) return a.objectness > b.objectness;
        return tie_before(a.box, b.box);
    });
    if (static_cast<int>(scored.size()) > h) scored.resize(static_cast<std::size_t>(h));
    return scored;
}

namespace detail {

inline void rerank_training_set(const BoundingBox& positive_box,
                                const std::vector<ScoredBox>& pool, const EdgeStructures& es,
                                double neg_overlap, RerankFeature& positive,
                                std::vector<RerankFeature>& negatives) {
    positive = rerank_feature(positive_box, es);
    negatives.clear();
    for (const auto& sb : pool)
        if (iou(sb.box, positive_box) < neg_overlap)
            negatives.push_back(rerank_feature(sb.box, es));
}

}  // namespace detail

// Frame-1 initialization: the estimate is the positive, pool boxes that
// barely overlap it are negatives. With no negatives the model stays zero
// and selection degenerates to objectness order.
inline void init_rerank(RerankModel& model, const BoundingBox& b1,
                        const std::vector<ScoredBox>& pool, const EdgeStructures& es) {
    RerankFeature positive;
    std::vector<RerankFeature> negatives;
    detail::rerank_training_set(b1, pool, es, model.config().neg_overlap, positive, negatives);
    model.train(positive, negatives, model.config().init_epochs);
}

// Periodic refresh: acts only when frame_index is a multiple of the update
// period, warm-starting from the current weights.
inline void update_rerank(RerankModel& model, int frame_index, const BoundingBox& estimate,
                          const std::vector<ScoredBox>& pool, const EdgeStructures& es) {
    if (frame_index % model.config().update_period != 0) return;
    RerankFeature positive;
    std::vector<RerankFeature> negatives;
    detail::rerank_training_set(estimate, pool, es, model.config().neg_overlap, positive,
                                negatives);
    model.train(positive, negatives, model.config().update_epochs);
}

}  // namespace ebt
