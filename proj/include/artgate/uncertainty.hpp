#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "artgate/artmap.hpp"
#include "artgate/common.hpp"
#include "artgate/spatial.hpp"

namespace artgate {

/// The five uncertainty thresholds plus the temporal bookkeeping windows.
struct UncertaintyCriteria {
    double psi1 = 0.5;   // detection: objectness floor
    double psi2 = 0.75;  // category fit: learning vigilance
    double psi3 = 0.85;  // similarity: overlap floor for the fallback stage
    double psi4 = 0.06;  // relevance: required support rate over the window
    double psi5 = 0.6;   // persistence: modal buffer frequency for a hypothesis
    int buffer_len = 10;        // K: hypothesis ring length in frames
    int relevance_window = 50;  // W frames
    int similarity_fanout = 5;  // S top nodes examined by the similarity stage

    void validate() const {
        auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
        if (!in_unit(psi1) || !in_unit(psi2) || !in_unit(psi3) || !in_unit(psi4) ||
            !in_unit(psi5))
            throw ConfigError("uncertainty criteria must lie in (0,1)");
        if (buffer_len < 1) throw ConfigError("buffer_len must be >= 1");
        if (relevance_window < 1) throw ConfigError("relevance_window must be >= 1");
        if (similarity_fanout < 1) throw ConfigError("similarity_fanout must be >= 1");
    }
};

enum class LearnMode { Supervised, SelfSupervised, Unsupervised, Frozen };

inline std::string to_string(LearnMode m) {
    switch (m) {
        case LearnMode::Supervised: return "supervised";
        case LearnMode::SelfSupervised: return "self_supervised";
        case LearnMode::Unsupervised: return "unsupervised";
        case LearnMode::Frozen: return "frozen";
    }
    return "?";
}

inline LearnMode learn_mode_from_string(const std::string& s) {
    if (s == "supervised") return LearnMode::Supervised;
    if (s == "self_supervised") return LearnMode::SelfSupervised;
    if (s == "unsupervised") return LearnMode::Unsupervised;
    if (s == "frozen") return LearnMode::Frozen;
    throw ConfigError("unknown learn mode: " + s);
}

struct Detection {
    FeatureVector features;
    double objectness = 1.0;
    std::int64_t object_id = -1;
    WorldPos position{0.0, 0.0};
    std::optional<int> supervised_label;
};

/// Objectness gate (criterion 1). Equality passes.
inline bool gate_detection(const Detection& det, double psi1) {
    return det.objectness >= psi1;
}

/// overlap(A, w) = |A ∧ w| / min(|A|, |w|). Equals 1 when either vector
/// contains the other. A degenerate all-zero template overlaps nothing.
inline double overlap(const ComplementVector& a, const std::vector<double>& weights) {
    if (a.size() != weights.size()) throw DimensionError("overlap: size mismatch");
    const double denom = std::min(a.norm(), city_block_norm(weights));
    if (denom < kFloatTol) return 0.0;
    return fuzzy_and_norm(a.values, weights) / denom;
}

enum class ClassOrigin { Supervised, SelfGenerated };

inline std::string to_string(ClassOrigin o) {
    return o == ClassOrigin::Supervised ? "supervised" : "self_generated";
}

struct ClassRecord {
    int index = 0;  // 1-based, dense
    ClassOrigin origin = ClassOrigin::Supervised;
    std::optional<std::string> human_label;
    std::int64_t support_count = 0;
    std::int64_t created_frame = 0;
    bool active = true;
};

/// Dense 1..n class table. Pruned classes go inactive; indices are never
/// reused.
class ClassRegistry {
public:
    int size() const { return static_cast<int>(records_.size()); }

    const ClassRecord& record(int index) const {
        check(index);
        return records_[static_cast<std::size_t>(index - 1)];
    }
    const std::vector<ClassRecord>& records() const { return records_; }

    int register_supervised(const std::string& name, std::int64_t frame = 0) {
        ClassRecord rec;
        rec.index = size() + 1;
        rec.origin = ClassOrigin::Supervised;
        rec.human_label = name;
        rec.created_frame = frame;
        records_.push_back(std::move(rec));
        return size();
    }

    int allocate_self_generated(std::int64_t frame) {
        ClassRecord rec;
        rec.index = size() + 1;
        rec.origin = ClassOrigin::SelfGenerated;
        rec.created_frame = frame;
        records_.push_back(std::move(rec));
        return size();
    }

    /// Accepts an externally chosen supervised label. Must extend the table
    /// densely; gaps are a caller bug.
    void ensure_supervised(int label, std::int64_t frame = 0) {
        if (label <= size()) return;
        if (label != size() + 1)
            throw DomainError("supervised label " + std::to_string(label) +
                              " would leave a gap (n=" + std::to_string(size()) + ")");
        ClassRecord rec;
        rec.index = label;
        rec.origin = ClassOrigin::Supervised;
        rec.created_frame = frame;
        records_.push_back(std::move(rec));
    }

    bool class_active(int index) const { return record(index).active; }

    void add_support(int index) { mutable_record(index).support_count += 1; }

    void deactivate(int index) { mutable_record(index).active = false; }

    void assign_human_label(const std::vector<int>& indices, const std::string& label) {
        for (int idx : indices) check(idx);
        for (int idx : indices) mutable_record(idx).human_label = label;
    }

    /// Active self-generated classes with support >= 3 and no human label yet.
    std::vector<int> flag_label_requests() const {
        std::vector<int> out;
        for (const auto& rec : records_)
            if (rec.active && rec.origin == ClassOrigin::SelfGenerated && rec.support_count >= 3 &&
                !rec.human_label)
                out.push_back(rec.index);
        return out;
    }

    std::string display_name(int index) const {
        const auto& rec = record(index);
        if (rec.human_label) return *rec.human_label;
        return "unknown-" + std::to_string(index);
    }

    // Restore support used when loading snapshots.
    void restore(std::vector<ClassRecord> records) {
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].index != static_cast<int>(i) + 1)
                throw DomainError("registry restore: indices must be dense 1..n");
        records_ = std::move(records);
    }

private:
    void check(int index) const {
        if (index < 1 || index > size())
            throw NotFoundError("no such class: " + std::to_string(index));
    }
    ClassRecord& mutable_record(int index) {
        check(index);
        return records_[static_cast<std::size_t>(index - 1)];
    }

    std::vector<ClassRecord> records_;
};

/// Ring buffer of recent category decisions for one object. Zero entries are
/// non-detections.
class HypothesisBuffer {
public:
    explicit HypothesisBuffer(int capacity = 10) : capacity_(capacity) {}

    void push(int category) {
        slots_.push_back(category);
        while (static_cast<int>(slots_.size()) > capacity_) slots_.pop_front();
    }

    int capacity() const { return capacity_; }
    const std::deque<int>& slots() const { return slots_; }

    /// Modal nonzero category and its count (ties -> lowest category).
    std::pair<int, int> modal_nonzero() const {
        std::map<int, int> counts;
        for (int c : slots_)
            if (c != 0) counts[c] += 1;
        int best_cat = 0, best_count = 0;
        for (const auto& [cat, count] : counts) {
            if (count > best_count) {
                best_cat = cat;
                best_count = count;
            }
        }
        return {best_cat, best_count};
    }

private:
    int capacity_;
    std::deque<int> slots_;
};

enum class DecisionPath { None, Resonance, Similarity, Commit };

inline std::string to_string(DecisionPath p) {
    switch (p) {
        case DecisionPath::None: return "none";
        case DecisionPath::Resonance: return "resonance";
        case DecisionPath::Similarity: return "similarity";
        case DecisionPath::Commit: return "commit";
    }
    return "?";
}

struct GateDiagnostics {
    int resets = 0;
    int match_tracked = 0;
    bool similarity_used = false;
    double buffer_frequency = 0.0;
    DecisionPath path = DecisionPath::None;
};

struct GateDecision {
    enum class Kind { RejectedDetection, Hypothesis, Unknown, NewClassCreated };
    Kind kind = Kind::Unknown;
    int category = 0;     // class decided for this detection (0: none)
    int hypothesis = -1;  // H: finalized class index, -1 = "I don't know"
    GateDiagnostics diag;
};

inline std::string to_string(GateDecision::Kind k) {
    switch (k) {
        case GateDecision::Kind::RejectedDetection: return "rejected";
        case GateDecision::Kind::Hypothesis: return "hypothesis";
        case GateDecision::Kind::Unknown: return "unknown";
        case GateDecision::Kind::NewClassCreated: return "new_class";
    }
    return "?";
}

struct LabelRequest {
    int class_index = 0;
    std::int64_t support_count = 0;
    std::string exemplar_digest;
};

/// The uncertainty-modulated decision loop: objectness gate, vigilance-gated
/// resonance, similarity fallback, one-shot class creation, and the
/// relevance/persistence bookkeeping over per-object hypothesis buffers.
///
/// Single-writer: one frame's detections are processed in order. Distinct
/// gates share nothing and may run on different threads.
class UncertaintyGate {
public:
    UncertaintyGate() = default;
    UncertaintyGate(std::size_t raw_dim, ArtmapParams params, UncertaintyCriteria criteria)
        : net_(raw_dim, params), criteria_(criteria) {
        criteria_.validate();
    }
    UncertaintyGate(ArtmapNetwork net, ClassRegistry registry, UncertaintyCriteria criteria)
        : net_(std::move(net)), registry_(std::move(registry)), criteria_(criteria) {
        criteria_.validate();
    }

    ArtmapNetwork& network() { return net_; }
    const ArtmapNetwork& network() const { return net_; }
    ClassRegistry& registry() { return registry_; }
    const ClassRegistry& registry() const { return registry_; }
    UncertaintyCriteria& criteria() { return criteria_; }
    const UncertaintyCriteria& criteria() const { return criteria_; }

    void set_spatial_memory(const SpatialMemory* spatial) { spatial_ = spatial; }
    void set_use_buffers(bool on) { use_buffers_ = on; }
    bool use_buffers() const { return use_buffers_; }

    /// Ψ1 -> complement code -> resonance (ρ = Ψ2) -> similarity (Ψ3) ->
    /// one-shot create, then buffer/persistence bookkeeping. Frozen mode
    /// classifies at ρ = rho_baseline and leaves all learnable state intact.
    GateDecision evaluate_detection(const Detection& det, LearnMode mode, std::int64_t frame) {
        GateDecision decision;
        if (!gate_detection(det, criteria_.psi1)) {
            decision.kind = GateDecision::Kind::RejectedDetection;
            return decision;
        }

        const ComplementVector a = complement_code(det.features);
        const bool learning = mode != LearnMode::Frozen;
        std::optional<int> supervised;
        if (mode == LearnMode::Supervised) {
            supervised = det.supervised_label;
        } else if (mode == LearnMode::SelfSupervised && spatial_ != nullptr) {
            supervised = spatial_->self_supervision_label(det.position);
        }
        if (supervised && learning) registry_.ensure_supervised(*supervised, frame);

        const NodeFilter admit = [this](int, const CategoryNode& node) {
            return node.label <= registry_.size() ? registry_.class_active(node.label) : true;
        };

        const double rho = learning ? criteria_.psi2 : net_.params().rho_baseline;
        auto outcome = net_.resonance_search(a, rho, learning ? supervised : std::nullopt,
                                             learning, admit);
        decision.diag.resets = outcome.resets;
        decision.diag.match_tracked = outcome.match_tracking_events;

        if (outcome.kind == LearnOutcome::Kind::UpdatedExisting) {
            decision.category = outcome.label;
            decision.diag.path = DecisionPath::Resonance;
            if (learning) registry_.add_support(outcome.label);
        } else if (learning && supervised) {
            // Uncommitted-node semantics: a labeled sample that exhausts the
            // search commits a fresh node with that label. The similarity
            // stage serves only the unlabeled novelty path (overlap is 1 for
            // any sample already inside a box, so it cannot bound labeled
            // relearning).
            net_.commit_new_node(a, *supervised, frame);
            decision.category = *supervised;
            decision.diag.path = DecisionPath::Commit;
            registry_.add_support(*supervised);
        } else if (learning) {
            const int similar = similarity_stage(a, outcome.ranked_candidates);
            if (similar >= 0) {
                net_.learn_into(similar, a);
                decision.category = net_.node(similar).label;
                decision.diag.path = DecisionPath::Similarity;
                decision.diag.similarity_used = true;
                registry_.add_support(decision.category);
            } else {
                const int fresh = one_shot_create(a, frame);
                decision.category = fresh;
                decision.diag.path = DecisionPath::Commit;
                decision.kind = GateDecision::Kind::NewClassCreated;
            }
        }

        finalize(decision, det.object_id, frame);
        return decision;
    }

    /// Similarity stage (criterion 3): walk the top-S original candidates in
    /// descending T and return the first whose overlap clears Ψ3.
    int similarity_stage(const ComplementVector& a, const std::vector<int>& ranked) const {
        const int fanout = criteria_.similarity_fanout;
        int examined = 0;
        for (int j : ranked) {
            if (examined >= fanout) break;
            ++examined;
            if (overlap(a, net_.node(j).weights) >= criteria_.psi3) return j;
        }
        return -1;
    }

    /// One-shot creation: allocate N = n+1 and commit a node with w = A. The
    /// class is immediately available for refinement and classification.
    int one_shot_create(const ComplementVector& a, std::int64_t frame) {
        const int label = registry_.allocate_self_generated(frame);
        net_.commit_new_node(a, label, frame);
        registry_.add_support(label);
        return label;
    }

    void push_hypothesis(std::int64_t object_id, int category, std::int64_t frame) {
        auto [it, inserted] =
            buffers_.try_emplace(object_id, HypothesisBuffer(criteria_.buffer_len));
        it->second.push(category);
        last_update_[object_id] = frame;
    }

    /// Inserts a non-detection into every buffer not updated at this frame.
    void decay_buffers(std::int64_t frame) {
        for (auto& [object_id, buffer] : buffers_) {
            auto it = last_update_.find(object_id);
            if (it == last_update_.end() || it->second != frame) buffer.push(0);
        }
    }

    /// Persistence (criterion 5): H = modal nonzero category when its buffer
    /// frequency reaches Ψ5, else -1.
    int persistence_finalize(std::int64_t object_id, double* frequency_out = nullptr) {
        auto it = buffers_.find(object_id);
        if (it == buffers_.end()) throw NotFoundError("no buffer for object");
        const auto [category, count] = it->second.modal_nonzero();
        const double freq =
            static_cast<double>(count) / static_cast<double>(criteria_.buffer_len);
        if (frequency_out != nullptr) *frequency_out = freq;
        if (category == 0 || freq < criteria_.psi5) return -1;
        maybe_enqueue_label_request(category);
        return category;
    }

    /// Relevance (criterion 4): deactivate self-generated classes whose
    /// support stayed below ceil(Ψ4·W) through their first W frames, and stop
    /// tracking objects unseen for W frames. Supervised classes are exempt.
    void relevance_prune(std::int64_t frame) {
        const auto threshold = static_cast<std::int64_t>(
            std::ceil(criteria_.psi4 * static_cast<double>(criteria_.relevance_window)));
        for (const auto& rec : registry_.records()) {
            if (!rec.active || rec.origin != ClassOrigin::SelfGenerated) continue;
            if (frame >= rec.created_frame + criteria_.relevance_window &&
                rec.support_count < threshold)
                registry_.deactivate(rec.index);
        }
        for (auto it = last_update_.begin(); it != last_update_.end();) {
            if (frame - it->second >= criteria_.relevance_window) {
                buffers_.erase(it->first);
                it = last_update_.erase(it);
            } else {
                ++it;
            }
        }
    }

    /// Per-frame bookkeeping, called after the frame's detections.
    void end_frame(std::int64_t frame) {
        if (use_buffers_) decay_buffers(frame);
        relevance_prune(frame);
    }

    const std::map<std::int64_t, HypothesisBuffer>& buffers() const { return buffers_; }

    /// Pending label requests (drained by the CLI prompt; never blocks).
    std::vector<LabelRequest> drain_label_requests() {
        auto out = std::move(pending_requests_);
        pending_requests_.clear();
        return out;
    }

    /// Digest of one node's template, used to show a human which exemplar a
    /// label request refers to.
    std::string exemplar_digest(int class_index) const {
        Fnv1aDigest digest;
        for (std::size_t j = 0; j < net_.node_count(); ++j) {
            const auto& node = net_.node(static_cast<int>(j));
            if (node.label != class_index) continue;
            for (double w : node.weights) digest.update(w);
            break;
        }
        return digest.hex();
    }

private:
    void finalize(GateDecision& decision, std::int64_t object_id, std::int64_t frame) {
        if (!use_buffers_) {
            decision.hypothesis = decision.category > 0 ? decision.category : -1;
            if (decision.kind != GateDecision::Kind::NewClassCreated)
                decision.kind = decision.category > 0 ? GateDecision::Kind::Hypothesis
                                                      : GateDecision::Kind::Unknown;
            return;
        }
        push_hypothesis(object_id, decision.category, frame);
        double freq = 0.0;
        decision.hypothesis = persistence_finalize(object_id, &freq);
        decision.diag.buffer_frequency = freq;
        if (decision.kind != GateDecision::Kind::NewClassCreated)
            decision.kind = decision.hypothesis > 0 ? GateDecision::Kind::Hypothesis
                                                    : GateDecision::Kind::Unknown;
    }

    void maybe_enqueue_label_request(int class_index) {
        const auto& rec = registry_.record(class_index);
        if (rec.origin != ClassOrigin::SelfGenerated || rec.human_label) return;
        for (const auto& req : pending_requests_)
            if (req.class_index == class_index) return;
        pending_requests_.push_back(
            {class_index, rec.support_count, exemplar_digest(class_index)});
    }

    ArtmapNetwork net_;
    ClassRegistry registry_;
    UncertaintyCriteria criteria_;
    std::map<std::int64_t, HypothesisBuffer> buffers_;
    std::map<std::int64_t, std::int64_t> last_update_;
    std::vector<LabelRequest> pending_requests_;
    const SpatialMemory* spatial_ = nullptr;
    bool use_buffers_ = false;
};

}  // namespace artgate
