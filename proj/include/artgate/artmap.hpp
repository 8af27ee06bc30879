#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "artgate/common.hpp"

namespace artgate {

/// Complement-coded input A = (a, 1-a). City-block norm is raw_dim() exactly,
/// which is what keeps category boxes from collapsing during learning.
struct ComplementVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    std::size_t raw_dim() const { return values.size() / 2; }

    double norm() const {
        return std::accumulate(values.begin(), values.end(), 0.0);
    }
};

inline ComplementVector complement_code(const FeatureVector& a) {
    if (a.empty()) throw DimensionError("complement_code: empty feature vector");
    ComplementVector out;
    out.values.resize(a.size() * 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] >= 0.0 && a[i] <= 1.0))
            throw DomainError("complement_code: element " + std::to_string(i) +
                              " outside [0,1]: " + std::to_string(a[i]));
        out.values[i] = a[i];
        out.values[i + a.size()] = 1.0 - a[i];
    }
    return out;
}

/// |x ∧ y| — city-block norm of the element-wise min.
inline double fuzzy_and_norm(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw DimensionError("fuzzy_and_norm: size mismatch " + std::to_string(x.size()) +
                             " vs " + std::to_string(y.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::min(x[i], y[i]);
    return s;
}

inline double city_block_norm(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0);
}

/// T_j = |A ∧ w_j| + (1-α)(M - |w_j|)
inline double activation(const ComplementVector& a, const std::vector<double>& weights,
                         double alpha) {
    if (a.size() != weights.size())
        throw DimensionError("activation: input/weight size mismatch");
    const double m = static_cast<double>(a.size());
    return fuzzy_and_norm(a.values, weights) + (1.0 - alpha) * (m - city_block_norm(weights));
}

/// Activated subset: indices with T_j > αM.
inline std::vector<int> candidate_subset(const std::vector<double>& activations, double alpha,
                                         std::size_t m) {
    std::vector<int> out;
    const double threshold = alpha * static_cast<double>(m);
    for (std::size_t j = 0; j < activations.size(); ++j)
        if (activations[j] > threshold) out.push_back(static_cast<int>(j));
    return out;
}

/// m = |A ∧ w| / |A|. |A| = M/2 > 0 for complement-coded input.
inline double match_ratio(const ComplementVector& a, const std::vector<double>& weights) {
    if (a.size() != weights.size())
        throw DimensionError("match_ratio: input/weight size mismatch");
    return fuzzy_and_norm(a.values, weights) / a.norm();
}

enum class MatchRule { Ratio, RawActivation };

inline std::string to_string(MatchRule r) {
    return r == MatchRule::Ratio ? "ratio" : "raw_activation";
}

inline MatchRule match_rule_from_string(const std::string& s) {
    if (s == "ratio") return MatchRule::Ratio;
    if (s == "raw_activation") return MatchRule::RawActivation;
    throw ConfigError("unknown match_rule: " + s);
}

struct ArtmapParams {
    double alpha = 0.01;      // signal rule parameter, (0,1)
    double beta = 1.0;        // learning fraction, (0,1]; 1 = fast learning
    double epsilon = -0.001;  // match-tracking increment, (-1,1)
    double rho_baseline = 0.0;  // vigilance used by read-only classification
    MatchRule match_rule = MatchRule::Ratio;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
        if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must be in (0,1]");
        if (!(epsilon > -1.0 && epsilon < 1.0)) throw ConfigError("epsilon must be in (-1,1)");
        if (!(rho_baseline >= 0.0 && rho_baseline <= 1.0))
            throw ConfigError("rho_baseline must be in [0,1]");
    }
};

/// One learned template. The label never changes after creation and the
/// weights are element-wise non-increasing over the node's lifetime.
struct CategoryNode {
    std::vector<double> weights;
    int label = 0;  // class index, 1-based
    std::int64_t support_count = 0;
    std::int64_t created_frame = 0;
};

struct LearnOutcome {
    enum class Kind { UpdatedExisting, CommittedNew, SearchExhausted };
    Kind kind = Kind::SearchExhausted;
    int node = -1;   // winning/committed node index (0-based), -1 if none
    int label = -1;  // that node's class, -1 if none
    double final_rho = 0.0;
    double match_value = 0.0;  // match of the resonating node, or of the last winner tried
    int resets = 0;
    int match_tracking_events = 0;
    // Original activated subset in descending-T order (ties broken by lowest
    // index). Kept so the caller can run the similarity fallback.
    std::vector<int> ranked_candidates;
};

struct Classification {
    int label = -1;  // -1: unknown
    int winner = -1;
    double activation = 0.0;
    double match = 0.0;
};

/// Admission predicate for candidate nodes; false excludes a node from the
/// activated subset (used to hide nodes of pruned classes).
using NodeFilter = std::function<bool(int node_index, const CategoryNode&)>;

/// Fuzzy-ARTMAP substrate: activation, vigilance-gated resonance search with
/// reset and match tracking, min-rule weight learning, node commitment.
///
/// Learning mutates the network and needs exclusive access; classification is
/// read-only. The whole network moves between threads as a value.
class ArtmapNetwork {
public:
    ArtmapNetwork() = default;
    ArtmapNetwork(std::size_t raw_dim, ArtmapParams params)
        : raw_dim_(raw_dim), params_(params) {
        if (raw_dim_ == 0) throw ConfigError("raw_dim must be positive");
        params_.validate();
    }

    std::size_t raw_dim() const { return raw_dim_; }
    std::size_t coded_dim() const { return raw_dim_ * 2; }
    const ArtmapParams& params() const { return params_; }
    ArtmapParams& params() { return params_; }

    std::size_t node_count() const { return nodes_.size(); }
    int label_count() const { return label_count_; }
    const std::vector<CategoryNode>& nodes() const { return nodes_; }
    const CategoryNode& node(int j) const {
        check_node(j);
        return nodes_[static_cast<std::size_t>(j)];
    }

    /// Replaces the node table wholesale (snapshot restore).
    void restore_nodes(std::vector<CategoryNode> nodes) {
        int max_label = 0;
        for (const auto& node : nodes) {
            if (node.weights.size() != coded_dim())
                throw DimensionError("restore_nodes: node weight length " +
                                     std::to_string(node.weights.size()) + " != " +
                                     std::to_string(coded_dim()));
            if (node.label < 1) throw DomainError("restore_nodes: node label must be >= 1");
            for (double w : node.weights)
                if (!(w >= 0.0 && w <= 1.0))
                    throw DomainError("restore_nodes: weight outside [0,1]");
            max_label = std::max(max_label, node.label);
        }
        nodes_ = std::move(nodes);
        label_count_ = max_label;
    }

    /// Per-node activation levels for a coded input.
    std::vector<double> activations(const ComplementVector& a) const {
        check_input(a);
        std::vector<double> t(nodes_.size());
        for (std::size_t j = 0; j < nodes_.size(); ++j)
            t[j] = activation(a, nodes_[j].weights, params_.alpha);
        return t;
    }

    /// Match value the vigilance test compares against ρ.
    double match_value(const ComplementVector& a, int j) const {
        check_node(j);
        const auto& w = nodes_[static_cast<std::size_t>(j)].weights;
        if (params_.match_rule == MatchRule::Ratio) return match_ratio(a, w);
        return activation(a, w, params_.alpha) / static_cast<double>(coded_dim());
    }

    /// w_J ← β(A ∧ w_J) + (1-β)w_J ; bumps the node's support count.
    void learn_into(int j, const ComplementVector& a) {
        check_node(j);
        check_input(a);
        auto& node = nodes_[static_cast<std::size_t>(j)];
        const double beta = params_.beta;
        for (std::size_t i = 0; i < node.weights.size(); ++i) {
            const double fused = std::min(a.values[i], node.weights[i]);
            node.weights[i] = beta * fused + (1.0 - beta) * node.weights[i];
        }
        node.support_count += 1;
    }

    /// New committed node with w = A. Returns its index.
    int commit_new_node(const ComplementVector& a, int label, std::int64_t frame = 0) {
        check_input(a);
        if (label < 1) throw DomainError("commit_new_node: label must be >= 1");
        CategoryNode node;
        node.weights = a.values;
        node.label = label;
        node.support_count = 1;
        node.created_frame = frame;
        nodes_.push_back(std::move(node));
        label_count_ = std::max(label_count_, label);
        return static_cast<int>(nodes_.size()) - 1;
    }

    /// Winner-take-all resonance search over the activated subset.
    ///
    /// Repeats: pick J = argmax T among remaining candidates (ties → lowest
    /// index); reset if the vigilance test fails; on a supervised label
    /// mismatch raise ρ to m_J + ε (match tracking) and reset; otherwise
    /// resonate, learning into J when learning is enabled. ρ never decreases
    /// within one search. Exhaustion is a normal outcome — the caller owns
    /// the similarity/novelty fallback.
    LearnOutcome resonance_search(const ComplementVector& a, double rho_start,
                                  std::optional<int> supervised_label, bool learning_enabled,
                                  const NodeFilter& admit = nullptr) {
        check_input(a);
        LearnOutcome out;
        out.final_rho = rho_start;

        const auto t = activations(a);
        std::vector<int> candidates = candidate_subset(t, params_.alpha, coded_dim());
        if (admit) {
            std::erase_if(candidates, [&](int j) {
                return !admit(j, nodes_[static_cast<std::size_t>(j)]);
            });
        }
        out.ranked_candidates = candidates;
        std::stable_sort(out.ranked_candidates.begin(), out.ranked_candidates.end(),
                         [&](int lhs, int rhs) {
                             if (t[static_cast<std::size_t>(lhs)] != t[static_cast<std::size_t>(rhs)])
                                 return t[static_cast<std::size_t>(lhs)] > t[static_cast<std::size_t>(rhs)];
                             return lhs < rhs;
                         });

        // A reset removes the current winner for good, so the repeated argmax
        // reduces to one walk down the ranked list.
        double rho = rho_start;
        for (int j : out.ranked_candidates) {
            const double m = match_value(a, j);
            out.match_value = m;
            if (m < rho) {  // vigilance reset
                out.resets += 1;
                continue;
            }
            const int node_label = nodes_[static_cast<std::size_t>(j)].label;
            if (supervised_label && node_label != *supervised_label) {
                // Match tracking: raise ρ just past the offender, keep searching.
                rho = std::max(rho, m + params_.epsilon);
                out.match_tracking_events += 1;
                out.resets += 1;
                continue;
            }
            if (learning_enabled) learn_into(j, a);
            out.kind = LearnOutcome::Kind::UpdatedExisting;
            out.node = j;
            out.label = node_label;
            out.final_rho = rho;
            return out;
        }
        out.kind = LearnOutcome::Kind::SearchExhausted;
        out.final_rho = rho;
        return out;
    }

    /// Read-only classification at ρ = rho_baseline. Unknown when no
    /// candidate passes vigilance.
    Classification classify(const ComplementVector& a, const NodeFilter& admit = nullptr) const {
        check_input(a);
        Classification out;
        if (nodes_.empty()) return out;

        const auto t = activations(a);
        auto candidates = candidate_subset(t, params_.alpha, coded_dim());
        if (admit) {
            std::erase_if(candidates, [&](int j) {
                return !admit(j, nodes_[static_cast<std::size_t>(j)]);
            });
        }
        std::stable_sort(candidates.begin(), candidates.end(), [&](int lhs, int rhs) {
            if (t[static_cast<std::size_t>(lhs)] != t[static_cast<std::size_t>(rhs)])
                return t[static_cast<std::size_t>(lhs)] > t[static_cast<std::size_t>(rhs)];
            return lhs < rhs;
        });
        for (int j : candidates) {
            const double m = match_value(a, j);
            if (m >= params_.rho_baseline) {
                out.label = nodes_[static_cast<std::size_t>(j)].label;
                out.winner = j;
                out.activation = t[static_cast<std::size_t>(j)];
                out.match = m;
                return out;
            }
        }
        return out;
    }

private:
    void check_input(const ComplementVector& a) const {
        if (a.size() != coded_dim())
            throw DimensionError("expected coded input of length " + std::to_string(coded_dim()) +
                                 ", got " + std::to_string(a.size()));
    }
    void check_node(int j) const {
        if (j < 0 || static_cast<std::size_t>(j) >= nodes_.size())
            throw NotFoundError("no such node: " + std::to_string(j));
    }

    std::size_t raw_dim_ = 0;
    ArtmapParams params_;
    std::vector<CategoryNode> nodes_;
    int label_count_ = 0;  // n: highest label committed so far
};

}  // namespace artgate
