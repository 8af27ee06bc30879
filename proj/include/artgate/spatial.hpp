#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>

#include "artgate/common.hpp"

namespace artgate {

using WorldPos = std::array<double, 2>;

inline double distance(const WorldPos& a, const WorldPos& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

/// One remembered object: where it is and, if acquired confidently enough,
/// what it is.
struct TrackedObject {
    std::int64_t object_id = -1;
    WorldPos position{0.0, 0.0};
    std::optional<int> acquired_label;
    double acquisition_confidence = 0.0;
    std::int64_t last_seen_frame = 0;
};

/// Persistent map of behaviorally relevant objects. Supplies ground-truth
/// labels for self-supervised learning via nearest-neighbor association.
///
/// Labels are only stored when acquisition confidence clears the floor, and
/// lookups never invent labels that were not acquired. Callers are expected
/// to keep distinct objects at least association_radius apart; lookup always
/// resolves to the nearest candidate, so association stays deterministic
/// either way.
class SpatialMemory {
public:
    SpatialMemory() = default;
    SpatialMemory(double association_radius, double confidence_floor)
        : association_radius_(association_radius), confidence_floor_(confidence_floor) {
        if (association_radius_ <= 0.0) throw ConfigError("association_radius must be positive");
    }

    double association_radius() const { return association_radius_; }
    double confidence_floor() const { return confidence_floor_; }
    std::size_t size() const { return objects_.size(); }

    void acquire(std::int64_t object_id, const WorldPos& position, int label, double confidence,
                 std::int64_t frame = 0) {
        if (!(confidence >= 0.0 && confidence <= 1.0))
            throw DomainError("acquire: confidence outside [0,1]");
        auto& obj = objects_[object_id];
        obj.object_id = object_id;
        obj.position = position;
        obj.last_seen_frame = frame;
        if (confidence >= confidence_floor_) {
            obj.acquired_label = label;
            obj.acquisition_confidence = confidence;
        }
    }

    void touch(std::int64_t object_id, std::int64_t frame) {
        auto it = objects_.find(object_id);
        if (it != objects_.end()) it->second.last_seen_frame = frame;
    }

    /// Label of the nearest labeled object within the association radius.
    std::optional<int> self_supervision_label(const WorldPos& position) const {
        const TrackedObject* best = nullptr;
        double best_dist = 0.0;
        for (const auto& [id, obj] : objects_) {
            if (!obj.acquired_label) continue;
            const double d = distance(position, obj.position);
            if (d > association_radius_) continue;
            // strict < keeps the lower-id object on exact ties
            if (best == nullptr || d < best_dist) {
                best = &obj;
                best_dist = d;
            }
        }
        if (best == nullptr) return std::nullopt;
        return best->acquired_label;
    }

    /// Drops objects unseen for more than max_age frames (age == max_age is kept).
    void prune_stale(std::int64_t frame, std::int64_t max_age) {
        for (auto it = objects_.begin(); it != objects_.end();) {
            if (frame - it->second.last_seen_frame > max_age)
                it = objects_.erase(it);
            else
                ++it;
        }
    }

    const std::map<std::int64_t, TrackedObject>& objects() const { return objects_; }

private:
    double association_radius_ = 2.0;
    double confidence_floor_ = 0.95;
    std::map<std::int64_t, TrackedObject> objects_;
};

}  // namespace artgate
