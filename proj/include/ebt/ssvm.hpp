// Online structured SVM with a support-vector budget, after the LaRank
// scheme: each frame contributes a pattern (one true box plus negative
// candidate boxes, structured loss 1 - IoU), optimized by pairwise SMO steps
// that maximize the dual. ProcessNew introduces the new pattern, ProcessOld
// revisits a random retained pattern and may add one support vector,
// Optimize rebalances coefficients among existing support vectors. When the
// budget is exceeded, the support vector whose removal least perturbs the
// weight vector in the kernel-induced norm is merged into its pattern's
// positive vector, preserving the per-pattern zero-sum constraint.
//
// Dual feasibility invariants maintained throughout: per-pattern coefficients
// sum to zero, the positive (true-label) coefficient stays in [0, C], all
// others stay <= 0, and every SMO step is non-decreasing in the dual.
#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "ebt/patch_feature.hpp"
#include "ebt/rng.hpp"

namespace ebt {

struct SvmConfig {
    double c = 100.0;
    int budget = 100;
    int reprocess_steps = 10;
};

class BudgetedStructSvm {
public:
    struct SupportVectorView {
        int pattern_id = 0;
        double coefficient = 0.0;
        bool is_positive = false;
        BoundingBox box;
    };

    BudgetedStructSvm(const SvmConfig& cfg, std::uint64_t seed)
        : cfg_(cfg), rng_(seed), capacity_(cfg.budget + 2) {
        kernel_.assign(static_cast<std::size_t>(capacity_) * capacity_, 0.0);
    }

    double evaluate(const PatchFeature& x) const {
        double f = 0.0;
        for (const auto& sv : svs_)
            f += sv.coeff * intersection_kernel(feature_of(sv), x);
        return f;
    }

    // Adds a new pattern (candidates[positive] is the true box) and runs one
    // ProcessNew step followed by alternating ProcessOld / Optimize passes.
    void update(std::vector<BoundingBox> boxes, std::vector<PatchFeature> features,
                int positive, int pattern_id) {
        if (boxes.size() != features.size() || boxes.empty())
            throw std::invalid_argument("ssvm update: boxes/features mismatch");
        if (positive < 0 || positive >= static_cast<int>(boxes.size()))
            throw std::invalid_argument("ssvm update: bad positive index");
        if (record_dual_trace_) dual_trace_.clear();

        auto pat = std::make_unique<Pattern>();
        pat->id = pattern_id;
        pat->positive = positive;
        pat->boxes = std::move(boxes);
        pat->features = std::move(features);
        pat->losses.resize(pat->boxes.size());
        for (std::size_t i = 0; i < pat->boxes.size(); ++i)
            pat->losses[i] = 1.0 - iou(pat->boxes[i], pat->boxes[static_cast<std::size_t>(positive)]);
        pat->cache.assign(pat->boxes.size() * static_cast<std::size_t>(capacity_), 0.0);
        pat->cache_uid.assign(static_cast<std::size_t>(capacity_), -1);
        patterns_.push_back(std::move(pat));

        process_new(patterns_.back().get());
        enforce_budget();
        for (int r = 0; r < cfg_.reprocess_steps; ++r) {
            process_old();
            enforce_budget();
            optimize();
            enforce_budget();
        }
    }

    int support_count() const { return static_cast<int>(svs_.size()); }
    int pattern_count() const { return static_cast<int>(patterns_.size()); }
    const SvmConfig& config() const { return cfg_; }

    std::vector<SupportVectorView> support_vectors() const {
        std::vector<SupportVectorView> out;
        out.reserve(svs_.size());
        for (const auto& sv : svs_)
            out.push_back({sv.pattern->id, sv.coeff, sv.cand == sv.pattern->positive,
                           sv.pattern->boxes[static_cast<std::size_t>(sv.cand)]});
        return out;
    }

    double dual_objective() const {
        double d = 0.0;
        for (std::size_t i = 0; i < svs_.size(); ++i) {
            d -= svs_[i].coeff * svs_[i].pattern->losses[static_cast<std::size_t>(svs_[i].cand)];
            for (std::size_t j = 0; j < svs_.size(); ++j)
                d -= 0.5 * svs_[i].coeff * svs_[j].coeff * kernel_at(i, j);
        }
        return d;
    }

    void set_record_dual_trace(bool on) { record_dual_trace_ = on; }
    // (before, after) dual values, one entry per SMO step of the last update.
    const std::vector<std::pair<double, double>>& dual_trace() const { return dual_trace_; }

    void save_checkpoint(std::ostream& out) const {
        out << "ebt-ssvm-checkpoint v1\n";
        out << "c " << cfg_.c << " budget " << cfg_.budget << "\n";
        out << "supports " << svs_.size() << "\n";
        char buf[256];
        for (const auto& sv : svs_) {
            const auto& b = sv.pattern->boxes[static_cast<std::size_t>(sv.cand)];
            std::snprintf(buf, sizeof(buf), "%d %.17g %d %.17g %.17g %.17g %.17g\n",
                          sv.pattern->id, sv.coeff, sv.cand == sv.pattern->positive ? 1 : 0,
                          b.x, b.y, b.w, b.h);
            out << buf;
        }
    }

    static std::vector<SupportVectorView> load_checkpoint(std::istream& in) {
        std::string line;
        if (!std::getline(in, line) || line != "ebt-ssvm-checkpoint v1")
            throw std::runtime_error("ssvm checkpoint: bad header");
        std::getline(in, line);  // parameters, informational
        if (!std::getline(in, line) || line.rfind("supports ", 0) != 0)
            throw std::runtime_error("ssvm checkpoint: missing support count");
        const std::size_t n = std::stoul(line.substr(9));
        std::vector<SupportVectorView> out;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line))
                throw std::runtime_error("ssvm checkpoint: truncated");
            std::istringstream ls(line);
            SupportVectorView v;
            int pos = 0;
            if (!(ls >> v.pattern_id >> v.coefficient >> pos >> v.box.x >> v.box.y >>
                  v.box.w >> v.box.h))
                throw std::runtime_error("ssvm checkpoint: bad record");
            v.is_positive = pos != 0;
            out.push_back(v);
        }
        return out;
    }

private:
    struct Pattern {
        int id = 0;
        int positive = 0;
        int ref_count = 0;
        std::vector<BoundingBox> boxes;
        std::vector<PatchFeature> features;
        std::vector<double> losses;
        // candidate x slot kernel cache; cache_uid tracks which support
        // vector each column currently refers to
        std::vector<double> cache;
        std::vector<std::int64_t> cache_uid;
    };

    struct SupportVector {
        Pattern* pattern = nullptr;
        int cand = 0;
        double coeff = 0.0;
        double grad = 0.0;
        std::int64_t uid = 0;
    };

    const PatchFeature& feature_of(const SupportVector& sv) const {
        return sv.pattern->features[static_cast<std::size_t>(sv.cand)];
    }

    double kernel_at(std::size_t i, std::size_t j) const {
        return kernel_[i * static_cast<std::size_t>(capacity_) + j];
    }
    double& kernel_at(std::size_t i, std::size_t j) {
        return kernel_[i * static_cast<std::size_t>(capacity_) + j];
    }

    int find_sv(const Pattern* pat, int cand) const {
        for (std::size_t i = 0; i < svs_.size(); ++i)
            if (svs_[i].pattern == pat && svs_[i].cand == cand) return static_cast<int>(i);
        return -1;
    }

    int positive_sv(const Pattern* pat) const { return find_sv(pat, pat->positive); }

    int add_sv(Pattern* pat, int cand, double grad) {
        const int idx = static_cast<int>(svs_.size());
        SupportVector sv;
        sv.pattern = pat;
        sv.cand = cand;
        sv.grad = grad;
        sv.uid = next_uid_++;
        svs_.push_back(sv);
        pat->ref_count++;
        const PatchFeature& x = pat->features[static_cast<std::size_t>(cand)];
        for (int j = 0; j < idx; ++j) {
            const double k = intersection_kernel(feature_of(svs_[static_cast<std::size_t>(j)]), x);
            kernel_at(static_cast<std::size_t>(j), static_cast<std::size_t>(idx)) = k;
            kernel_at(static_cast<std::size_t>(idx), static_cast<std::size_t>(j)) = k;
        }
        kernel_at(static_cast<std::size_t>(idx), static_cast<std::size_t>(idx)) =
            intersection_kernel(x, x);
        return idx;
    }

    void remove_sv(int idx) {
        Pattern* pat = svs_[static_cast<std::size_t>(idx)].pattern;
        const int last = static_cast<int>(svs_.size()) - 1;
        if (idx != last) {
            std::swap(svs_[static_cast<std::size_t>(idx)], svs_[static_cast<std::size_t>(last)]);
            for (std::size_t j = 0; j < svs_.size(); ++j) {
                std::swap(kernel_at(static_cast<std::size_t>(idx), j),
                          kernel_at(static_cast<std::size_t>(last), j));
            }
            for (std::size_t j = 0; j < svs_.size(); ++j) {
                std::swap(kernel_at(j, static_cast<std::size_t>(idx)),
                          kernel_at(j, static_cast<std::size_t>(last)));
            }
        }
        svs_.pop_back();
        pat->ref_count--;
        if (pat->ref_count == 0) {
            for (std::size_t i = 0; i < patterns_.size(); ++i) {
                if (patterns_[i].get() == pat) {
                    patterns_.erase(patterns_.begin() + static_cast<std::ptrdiff_t>(i));
                    break;
                }
            }
        }
    }

    // Brings the pattern's kernel cache up to date with the current support
    // set, then returns f(x_i) for candidate i.
    void refresh_cache(Pattern* pat) {
        for (std::size_t j = 0; j < svs_.size(); ++j) {
            if (pat->cache_uid[j] == svs_[j].uid) continue;
            const PatchFeature& svx = feature_of(svs_[j]);
            for (std::size_t i = 0; i < pat->boxes.size(); ++i)
                pat->cache[i * static_cast<std::size_t>(capacity_) + j] =
                    intersection_kernel(pat->features[i], svx);
            pat->cache_uid[j] = svs_[j].uid;
        }
    }

    double cached_score(const Pattern* pat, std::size_t cand) const {
        double f = 0.0;
        const double* row = &pat->cache[cand * static_cast<std::size_t>(capacity_)];
        for (std::size_t j = 0; j < svs_.size(); ++j) f += svs_[j].coeff * row[j];
        return f;
    }

    // Candidate with the most violated (smallest) gradient in a pattern.
    std::pair<int, double> min_gradient(Pattern* pat) {
        refresh_cache(pat);
        int best = -1;
        double best_g = 0.0;
        for (std::size_t i = 0; i < pat->boxes.size(); ++i) {
            const double g = -pat->losses[i] - cached_score(pat, i);
            if (best < 0 || g < best_g) {
                best = static_cast<int>(i);
                best_g = g;
            }
        }
        return {best, best_g};
    }

    double upper_bound(const SupportVector& sv) const {
        return sv.cand == sv.pattern->positive ? cfg_.c : 0.0;
    }

    void smo_step(int ip, int in) {
        if (ip < 0 || in < 0 || ip == in) return;
        SupportVector& svp = svs_[static_cast<std::size_t>(ip)];
        SupportVector& svn = svs_[static_cast<std::size_t>(in)];
        if (svp.pattern != svn.pattern) return;
        const double gap = svp.grad - svn.grad;
        if (gap < 1e-5) {
            cleanup_pattern(svp.pattern);
            return;
        }
        const double kii = kernel_at(static_cast<std::size_t>(ip), static_cast<std::size_t>(ip)) +
                           kernel_at(static_cast<std::size_t>(in), static_cast<std::size_t>(in)) -
                           2.0 * kernel_at(static_cast<std::size_t>(ip), static_cast<std::size_t>(in));
        const double room = upper_bound(svp) - svp.coeff;
        double l = kii > 0.0 ? std::min(gap / kii, room) : room;
        if (l <= 0.0) {
            cleanup_pattern(svp.pattern);
            return;
        }

        const double dual_before = record_dual_trace_ ? dual_objective() : 0.0;
        if (l == room)
            svp.coeff = upper_bound(svp);
        else
            svp.coeff += l;
        svn.coeff -= l;
        for (std::size_t j = 0; j < svs_.size(); ++j) {
            svs_[j].grad -= l * (kernel_at(j, static_cast<std::size_t>(ip)) -
                                 kernel_at(j, static_cast<std::size_t>(in)));
        }
        if (record_dual_trace_) dual_trace_.emplace_back(dual_before, dual_objective());
        cleanup_pattern(svp.pattern);
    }

    // Folds negligible coefficients into the pattern's positive vector and
    // drops the pattern entirely once its positive coefficient vanishes.
    void cleanup_pattern(Pattern* pat) {
        const int pos = positive_sv(pat);
        if (pos < 0) return;
        for (int i = static_cast<int>(svs_.size()) - 1; i >= 0; --i) {
            const SupportVector& sv = svs_[static_cast<std::size_t>(i)];
            if (sv.pattern != pat || sv.cand == pat->positive) continue;
            if (std::fabs(sv.coeff) < 1e-12) {
                const int p = positive_sv(pat);
                svs_[static_cast<std::size_t>(p)].coeff += sv.coeff;
                remove_sv(i);
            }
        }
        const int p = positive_sv(pat);
        if (p >= 0 && svs_[static_cast<std::size_t>(p)].coeff < 1e-12) {
            for (int i = static_cast<int>(svs_.size()) - 1; i >= 0; --i)
                if (svs_[static_cast<std::size_t>(i)].pattern == pat) remove_sv(i);
        }
    }

    void process_new(Pattern* pat) {
        refresh_cache(pat);
        const double f_pos = cached_score(pat, static_cast<std::size_t>(pat->positive));
        const int ip = add_sv(pat, pat->positive, -f_pos);
        const auto [cand, grad] = min_gradient(pat);
        if (cand == pat->positive) {
            cleanup_pattern(pat);
            return;
        }
        const int in = add_sv(pat, cand, grad);
        smo_step(ip, in);
    }

    void process_old() {
        if (patterns_.empty()) return;
        Pattern* pat = patterns_[rng_.uniform_index(patterns_.size())].get();
        int ip = -1;
        double max_grad = 0.0;
        for (std::size_t i = 0; i < svs_.size(); ++i) {
            const SupportVector& sv = svs_[i];
            if (sv.pattern != pat) continue;
            if (sv.coeff < upper_bound(sv) && (ip < 0 || sv.grad > max_grad)) {
                ip = static_cast<int>(i);
                max_grad = sv.grad;
            }
        }
        if (ip < 0) return;
        const auto [cand, grad] = min_gradient(pat);
        if (cand < 0) return;
        int in = find_sv(pat, cand);
        if (in < 0) in = add_sv(pat, cand, grad);
        smo_step(ip, in);
    }

    void optimize() {
        if (patterns_.empty()) return;
        Pattern* pat = patterns_[rng_.uniform_index(patterns_.size())].get();
        int ip = -1, in = -1;
        double max_grad = 0.0, min_grad = 0.0;
        for (std::size_t i = 0; i < svs_.size(); ++i) {
            const SupportVector& sv = svs_[i];
            if (sv.pattern != pat) continue;
            if (sv.coeff < upper_bound(sv) && (ip < 0 || sv.grad > max_grad)) {
                ip = static_cast<int>(i);
                max_grad = sv.grad;
            }
            if (in < 0 || sv.grad < min_grad) {
                in = static_cast<int>(i);
                min_grad = sv.grad;
            }
        }
        smo_step(ip, in);
    }

    void enforce_budget() {
        while (static_cast<int>(svs_.size()) > cfg_.budget) {
            int victim = -1, pos_of_victim = -1;
            double min_impact = 0.0;
            for (std::size_t i = 0; i < svs_.size(); ++i) {
                if (svs_[i].coeff >= 0.0) continue;
                const int p = positive_sv(svs_[i].pattern);
                if (p < 0) continue;
                const double impact =
                    svs_[i].coeff * svs_[i].coeff *
                    (kernel_at(i, i) + kernel_at(static_cast<std::size_t>(p), static_cast<std::size_t>(p)) -
                     2.0 * kernel_at(i, static_cast<std::size_t>(p)));
                if (victim < 0 || impact < min_impact) {
                    victim = static_cast<int>(i);
                    pos_of_victim = p;
                    min_impact = impact;
                }
            }
            if (victim < 0) break;  // nothing evictable

            Pattern* pat = svs_[static_cast<std::size_t>(victim)].pattern;
            svs_[static_cast<std::size_t>(pos_of_victim)].coeff +=
                svs_[static_cast<std::size_t>(victim)].coeff;
            remove_sv(victim);
            const int p = positive_sv(pat);
            if (p >= 0 && svs_[static_cast<std::size_t>(p)].coeff < 1e-12) {
                for (int i = static_cast<int>(svs_.size()) - 1; i >= 0; --i)
                    if (svs_[static_cast<std::size_t>(i)].pattern == pat) remove_sv(i);
            }
            // gradients are recomputed from scratch after an eviction
            for (std::size_t i = 0; i < svs_.size(); ++i) {
                double f = 0.0;
                for (std::size_t j = 0; j < svs_.size(); ++j)
                    f += svs_[j].coeff * kernel_at(i, j);
                svs_[i].grad =
                    -svs_[i].pattern->losses[static_cast<std::size_t>(svs_[i].cand)] - f;
            }
        }
    }

    SvmConfig cfg_;
    Rng rng_;
    int capacity_;
    std::int64_t next_uid_ = 0;
    std::vector<std::unique_ptr<Pattern>> patterns_;
    std::vector<SupportVector> svs_;
    std::vector<double> kernel_;
    bool record_dual_trace_ = false;
    std::vector<std::pair<double, double>> dual_trace_;
};

}  // namespace ebt
