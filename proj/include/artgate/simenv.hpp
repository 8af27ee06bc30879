#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artgate/common.hpp"
#include "artgate/spatial.hpp"
#include "artgate/uncertainty.hpp"

namespace artgate::sim {

using nlohmann::json;

enum class SetId { A, B, O, C };

inline std::string to_string(SetId s) {
    switch (s) {
        case SetId::A: return "A";
        case SetId::B: return "B";
        case SetId::O: return "O";
        case SetId::C: return "C";
    }
    return "?";
}

inline SetId set_from_string(const std::string& s) {
    if (s == "A") return SetId::A;
    if (s == "B") return SetId::B;
    if (s == "O") return SetId::O;
    if (s == "C") return SetId::C;
    throw ConfigError("unknown object set: " + s);
}

struct ClassSpec {
    int class_id = 0;  // dense across the scenario, 1-based
    std::string name;
    FeatureVector center;  // [0,1]^raw_dim
};

struct ObjectSetSpec {
    SetId id = SetId::A;
    std::vector<ClassSpec> classes;
    FeatureVector spread;  // per-dimension std of per-object offsets
    FeatureVector drift;   // raw drift vector; applied as (altitude/30)*drift
    int instances = 0;
    int ground_samples = 0;
    int aerial_samples = 0;

    double drift_magnitude() const {
        double s = 0.0;
        for (double v : drift) s += v * v;
        return std::sqrt(s);
    }
};

struct ViewCondition {
    double altitude = 0.0;  // meters
    double azimuth = 0.0;   // degrees
    std::uint64_t noise_seed = 0;
    int intersection = -1;  // -1: survey view over every object
};

struct IntersectionSpec {
    WorldPos position{0.0, 0.0};
    std::vector<SetId> sets;
};

struct NoiseSpec {
    double sigma_ground = 0.02;
    double sigma_aerial = 0.06;  // at 30 m
    double sigma(double altitude) const {
        const double t = clamp01(altitude / 30.0);
        return sigma_ground + (sigma_aerial - sigma_ground) * t;
    }
};

/// Altitude- and azimuth-dependent feature rotation. Features are blended
/// with a one-step cyclic shift of themselves inside fixed channel blocks;
/// the blend weight grows with altitude and is modulated by the azimuth.
/// This is the synthetic stand-in for the appearance change between ground
/// and aerial viewpoints: class information is relocated, not destroyed, so
/// aerial views stay learnable while ground templates stop matching.
struct MixSpec {
    double max = 1.0;
    double full_altitude = 14.0;  // altitude where the blend saturates
    double sharpness = 6.0;       // transition steepness below full_altitude
    double az_floor = 0.90;       // blend factor at azimuth 0
    double az_gain = 0.10;        // extra blend toward azimuth 90
    std::vector<std::array<int, 2>> blocks;  // [begin, end) channel blocks

    double gamma(double altitude, double azimuth) const {
        if (full_altitude <= 0.0) return 0.0;
        const double t = altitude / full_altitude;
        const double s = std::sin(azimuth * 3.14159265358979323846 / 180.0);
        return max * std::min(1.0, std::pow(t, sharpness)) * (az_floor + az_gain * s * s);
    }
};

struct ObjectnessSpec {
    double mean_ground = 0.90;
    double mean_aerial = 0.65;  // at 30 m
    double concentration = 150.0;
    double mean(double altitude) const {
        const double t = clamp01(altitude / 30.0);
        return mean_ground - (mean_ground - mean_aerial) * t;
    }
};

struct AltitudeSpec {
    double ground_low = 1.0;
    double ground_high = 2.0;
    double aerial_low = 15.0;
    double aerial_high = 25.0;
    std::vector<double> azimuths{0.0, 45.0, 90.0};
};

struct SplitSpec {
    double aerial_a_train = 0.7;
    double aerial_b_train = 0.5;
    double aerial_c_train = 0.1;
};

/// Confidence that a close pass reads an object's identity correctly; decays
/// with altitude so only low flight yields acquisitions.
struct AcquisitionSpec {
    double full_confidence_altitude = 2.5;
    double decay_per_meter = 0.1;
    double confidence(double altitude) const {
        if (altitude <= full_confidence_altitude) return 1.0;
        return std::max(0.0, 1.0 - (altitude - full_confidence_altitude) * decay_per_meter);
    }
};

struct Scenario {
    int raw_dim = 32;
    std::uint64_t seed = 42;
    std::vector<ObjectSetSpec> sets;
    NoiseSpec noise;
    MixSpec mix;
    ObjectnessSpec objectness;
    AltitudeSpec altitudes;
    SplitSpec splits;
    std::vector<IntersectionSpec> intersections;
    double spacing = 6.0;
    AcquisitionSpec acquisition;

    const ObjectSetSpec& set(SetId id) const {
        for (const auto& s : sets)
            if (s.id == id) return s;
        throw ConfigError("scenario has no set " + to_string(id));
    }

    const ClassSpec* find_class(int class_id) const {
        for (const auto& s : sets)
            for (const auto& c : s.classes)
                if (c.class_id == class_id) return &c;
        return nullptr;
    }

    std::string class_name(int class_id) const {
        const auto* c = find_class(class_id);
        return c != nullptr ? c->name : ("class-" + std::to_string(class_id));
    }

    /// Supervised classes (everything outside Set C), in dense id order.
    std::vector<ClassSpec> supervised_classes() const {
        std::vector<ClassSpec> out;
        for (const auto& s : sets) {
            if (s.id == SetId::C) continue;
            for (const auto& c : s.classes) out.push_back(c);
        }
        std::sort(out.begin(), out.end(),
                  [](const ClassSpec& a, const ClassSpec& b) { return a.class_id < b.class_id; });
        return out;
    }

    void validate() const {
        if (raw_dim < 1) throw ConfigError("raw_dim must be positive");
        for (const auto& s : sets) {
            if (s.spread.size() != static_cast<std::size_t>(raw_dim) ||
                s.drift.size() != static_cast<std::size_t>(raw_dim))
                throw ConfigError("set " + to_string(s.id) + ": spread/drift dim mismatch");
            for (const auto& c : s.classes) {
                if (c.center.size() != static_cast<std::size_t>(raw_dim))
                    throw ConfigError("class " + c.name + ": center dim mismatch");
                for (double v : c.center)
                    if (!(v >= 0.0 && v <= 1.0))
                        throw ConfigError("class " + c.name + ": center outside [0,1]");
            }
        }
    }
};

struct SimObject {
    std::int64_t object_id = -1;
    SetId set = SetId::A;
    int class_id = 0;
    int intersection = -1;
    WorldPos position{0.0, 0.0};
    FeatureVector base;  // class center + per-object offset, clipped
};

struct World {
    Scenario scenario;
    std::vector<SimObject> objects;

    std::vector<const SimObject*> at_intersection(int idx) const {
        std::vector<const SimObject*> out;
        for (const auto& o : objects)
            if (idx < 0 || o.intersection == idx) out.push_back(&o);
        return out;
    }
};

struct FrameDetection {
    Detection detection;
    int truth = 0;  // ground-truth class id (never fed to the learner)
};

struct SimFrame {
    std::int64_t frame = 0;
    ViewCondition view;
    std::vector<FrameDetection> detections;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// Default scenario
// ---------------------------------------------------------------------------

/// Channel layout of the default 32-dim feature space:
///   0..7   view channels (altitude-sensitive for every set)
///   8..9   vehicle signature shared by Sets A and B
///   10     Set B marker (fades with altitude, collapsing A/B apart-ness)
///   12..13 Set O signature
///   16..21 vehicle class codes; A and B class codes are interleaved so the
///          two sets have identical centroids once the B marker fades
///   22..27 one dim per Set O class
///   8..31  Set C is uniformly bright across all of these, keeping fire
///          trucks far from every learned vehicle template in any view
inline Scenario default_scenario() {
    constexpr int kDim = 32;
    constexpr double kLo = 0.15;
    constexpr double kHi = 0.85;
    constexpr double kView = 0.70;

    auto base_center = [&] {
        FeatureVector c(kDim, kLo);
        for (int i = 0; i < 8; ++i) c[static_cast<std::size_t>(i)] = kView;
        return c;
    };

    auto vehicle_class = [&](std::vector<int> code_dims, bool b_marker) {
        FeatureVector c = base_center();
        c[8] = kHi;
        c[9] = kHi;
        if (b_marker) c[10] = 0.45;
        for (int d : code_dims) c[static_cast<std::size_t>(d)] = kHi;
        return c;
    };

    Scenario sc;
    sc.raw_dim = kDim;
    sc.seed = 42;
    sc.mix.blocks = {{0, 8}, {8, 16}, {16, 22}, {22, 28}, {28, 32}};

    FeatureVector spread(kDim, 0.03);
    FeatureVector zero_drift(kDim, 0.0);

    // Shared altitude drift on the view channels.
    auto with_view_drift = [&](double amount) {
        FeatureVector d = zero_drift;
        for (int i = 0; i < 8; ++i) d[static_cast<std::size_t>(i)] = amount;
        return d;
    };

    {  // Set A: sedans, taxis, police cars
        ObjectSetSpec set;
        set.id = SetId::A;
        set.classes = {{1, "sedan", vehicle_class({16, 19}, false)},
                       {2, "taxi", vehicle_class({17, 20}, false)},
                       {3, "police_car", vehicle_class({18, 21}, false)}};
        set.spread = spread;
        set.drift = with_view_drift(-0.70);
        set.drift[8] = -0.50;
        set.drift[9] = -0.50;
        set.instances = 9;
        set.ground_samples = 677;
        set.aerial_samples = 645;
        sc.sets.push_back(std::move(set));
    }
    {  // Set B: vans, with codes interleaved against Set A's
        ObjectSetSpec set;
        set.id = SetId::B;
        set.classes = {{4, "van_mail", vehicle_class({16, 20}, true)},
                       {5, "van_delivery", vehicle_class({17, 21}, true)},
                       {6, "van_police", vehicle_class({18, 19, 21}, true)}};
        set.spread = spread;
        set.drift = with_view_drift(-0.70);
        set.drift[8] = -0.50;
        set.drift[9] = -0.50;
        set.drift[10] = -0.45;  // B marker fades aloft
        set.instances = 6;
        set.ground_samples = 1097;
        set.aerial_samples = 1390;
        sc.sets.push_back(std::move(set));
    }
    {  // Set O: street furniture
        ObjectSetSpec set;
        set.id = SetId::O;
        const std::vector<std::string> names{"stop_light",   "stop_sign", "crosswalk_sign",
                                             "fire_hydrant", "trash_can", "bench"};
        for (int i = 0; i < 6; ++i) {
            FeatureVector c = base_center();
            c[12] = kHi;
            c[13] = kHi;
            c[static_cast<std::size_t>(22 + i)] = kHi;
            set.classes.push_back({7 + i, names[static_cast<std::size_t>(i)], std::move(c)});
        }
        set.spread = spread;
        set.drift = with_view_drift(-0.70);
        set.drift[12] = -0.50;
        set.drift[13] = -0.50;
        set.instances = 12;
        set.ground_samples = 316;
        set.aerial_samples = 75;
        sc.sets.push_back(std::move(set));
    }
    {  // Set C: fire trucks. Constant inside every mix block, so the aerial
       // rotation cannot pull fire trucks toward any learned template.
        ObjectSetSpec set;
        set.id = SetId::C;
        FeatureVector c = base_center();
        for (int d = 8; d <= 31; ++d) c[static_cast<std::size_t>(d)] = 0.95;
        set.classes = {{13, "fire_truck", std::move(c)}};
        set.spread = spread;
        set.drift = with_view_drift(0.60);  // aerial appearance departs the vehicle region
        set.instances = 2;
        set.ground_samples = 0;
        set.aerial_samples = 298;
        sc.sets.push_back(std::move(set));
    }

    sc.intersections = {{{0.0, 0.0}, {SetId::A, SetId::O}},
                        {{60.0, 0.0}, {SetId::A, SetId::B, SetId::O}},
                        {{0.0, 60.0}, {SetId::C}}};
    return sc;
}

// ---------------------------------------------------------------------------
// World construction
// ---------------------------------------------------------------------------

inline WorldPos grid_spot(const WorldPos& center, int slot, double spacing) {
    // Deterministic outward spiral over a grid: (0,0),(1,0),(0,1),(-1,0),...
    static const std::array<std::array<int, 2>, 25> offsets{{{0, 0},   {1, 0},   {0, 1},  {-1, 0},
                                                             {0, -1},  {1, 1},   {-1, 1}, {-1, -1},
                                                             {1, -1},  {2, 0},   {0, 2},  {-2, 0},
                                                             {0, -2},  {2, 1},   {1, 2},  {-1, 2},
                                                             {-2, 1},  {-2, -1}, {-1, -2},{1, -2},
                                                             {2, -1},  {2, 2},   {-2, 2}, {-2, -2},
                                                             {2, -2}}};
    const auto& o = offsets[static_cast<std::size_t>(slot) % offsets.size()];
    return {center[0] + spacing * o[0], center[1] + spacing * o[1]};
}

inline World build_world(const Scenario& scenario, std::uint64_t seed) {
    scenario.validate();
    World world;
    world.scenario = scenario;

    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<int> occupancy(scenario.intersections.size(), 0);
    std::int64_t next_id = 0;

    for (const auto& set : scenario.sets) {
        // Intersections listing this set, in declaration order.
        std::vector<int> homes;
        for (std::size_t i = 0; i < scenario.intersections.size(); ++i)
            for (SetId s : scenario.intersections[i].sets)
                if (s == set.id) homes.push_back(static_cast<int>(i));

        for (int k = 0; k < set.instances; ++k) {
            if (set.classes.empty()) break;
            const auto& cls = set.classes[static_cast<std::size_t>(k) % set.classes.size()];
            SimObject obj;
            obj.object_id = next_id++;
            obj.set = set.id;
            obj.class_id = cls.class_id;
            if (!homes.empty()) {
                obj.intersection = homes[static_cast<std::size_t>(k) % homes.size()];
                auto& slot = occupancy[static_cast<std::size_t>(obj.intersection)];
                obj.position = grid_spot(scenario.intersections[static_cast<std::size_t>(
                                             obj.intersection)].position,
                                         slot++, scenario.spacing);
            }
            obj.base.resize(cls.center.size());
            for (std::size_t i = 0; i < cls.center.size(); ++i)
                obj.base[i] = clamp01(cls.center[i] + set.spread[i] * gauss(rng));
            world.objects.push_back(std::move(obj));
        }
    }
    return world;
}

// ---------------------------------------------------------------------------
// View transform and frame rendering
// ---------------------------------------------------------------------------

/// clip(base + (altitude/30)·drift + rotation mix + gaussian noise σ(altitude))
inline FeatureVector view_transform(const Scenario& scenario, SetId set_id,
                                    const FeatureVector& base, const ViewCondition& view,
                                    std::mt19937_64& rng) {
    const auto& set = scenario.set(set_id);
    if (base.size() != set.drift.size())
        throw DimensionError("view_transform: base/drift dim mismatch");

    const double scale = view.altitude / 30.0;
    FeatureVector shifted(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) shifted[i] = base[i] + scale * set.drift[i];

    // Azimuth-dependent rotation mix inside channel blocks.
    const double gamma = scenario.mix.gamma(view.altitude, view.azimuth);
    FeatureVector mixed = shifted;
    if (gamma > 0.0 && !scenario.mix.blocks.empty()) {
        const int step = 1;
        for (const auto& block : scenario.mix.blocks) {
            const int begin = block[0], end = block[1];
            const int len = end - begin;
            if (len <= 1) continue;
            for (int i = begin; i < end; ++i) {
                const int partner = begin + (i - begin + step) % len;
                mixed[static_cast<std::size_t>(i)] =
                    (1.0 - gamma) * shifted[static_cast<std::size_t>(i)] +
                    gamma * shifted[static_cast<std::size_t>(partner)];
            }
        }
    }

    const double sigma = scenario.noise.sigma(view.altitude);
    if (sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, sigma);
        for (auto& v : mixed) v += gauss(rng);
    }
    for (auto& v : mixed) v = clamp01(v);
    return mixed;
}

inline double sample_beta(std::mt19937_64& rng, double mean, double concentration) {
    const double a = std::max(1e-6, mean * concentration);
    const double b = std::max(1e-6, (1.0 - mean) * concentration);
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng), y = gb(rng);
    if (x + y <= 0.0) return mean;
    return x / (x + y);
}

inline FrameDetection render_object(const World& world, const SimObject& obj,
                                    const ViewCondition& view, std::mt19937_64& rng) {
    FrameDetection out;
    out.truth = obj.class_id;
    out.detection.features = view_transform(world.scenario, obj.set, obj.base, view, rng);
    out.detection.objectness =
        sample_beta(rng, world.scenario.objectness.mean(view.altitude),
                    world.scenario.objectness.concentration);
    out.detection.object_id = obj.object_id;
    std::normal_distribution<double> jitter(0.0, 0.2);
    out.detection.position = {obj.position[0] + jitter(rng), obj.position[1] + jitter(rng)};
    return out;
}

/// Detections for every object visible from the view (all objects at the
/// view's intersection). Deterministic per (world seed, view seed, frame).
inline SimFrame render_frame(const World& world, const ViewCondition& view,
                             std::int64_t frame) {
    SimFrame out;
    out.frame = frame;
    out.view = view;
    std::mt19937_64 rng(splitmix64(view.noise_seed ^ splitmix64(static_cast<std::uint64_t>(frame))));
    for (const auto* obj : world.at_intersection(view.intersection))
        out.detections.push_back(render_object(world, *obj, view, rng));
    return out;
}

// ---------------------------------------------------------------------------
// Sample streams (one detection per frame) for the learning experiments
// ---------------------------------------------------------------------------

struct StreamOptions {
    std::vector<SetId> sets;
    int count = 0;
    bool aerial = false;
    bool labeled = true;
    std::uint64_t seed = 0;
    // Fixed altitude override (used by the multi-height protocol); negative
    // means sample from the scenario's altitude band.
    double fixed_altitude = -1.0;
};

inline std::vector<SimFrame> make_sample_stream(const World& world, const StreamOptions& opt) {
    std::vector<const SimObject*> pool;
    for (const auto& obj : world.objects)
        for (SetId s : opt.sets)
            if (obj.set == s) pool.push_back(&obj);
    std::vector<SimFrame> frames;
    if (pool.empty() || opt.count <= 0) return frames;

    std::mt19937_64 rng(splitmix64(opt.seed ^ world.scenario.seed));
    const auto& alt = world.scenario.altitudes;
    std::uniform_real_distribution<double> ground_alt(alt.ground_low, alt.ground_high);
    std::uniform_real_distribution<double> aerial_alt(alt.aerial_low, alt.aerial_high);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_az(0, alt.azimuths.empty()
                                                              ? 0
                                                              : alt.azimuths.size() - 1);

    frames.reserve(static_cast<std::size_t>(opt.count));
    for (int i = 0; i < opt.count; ++i) {
        const SimObject& obj = *pool[pick(rng)];
        ViewCondition view;
        if (opt.fixed_altitude >= 0.0)
            view.altitude = opt.fixed_altitude;
        else
            view.altitude = opt.aerial ? aerial_alt(rng) : ground_alt(rng);
        view.azimuth = opt.aerial && !alt.azimuths.empty() ? alt.azimuths[pick_az(rng)] : 0.0;
        view.noise_seed = rng();
        view.intersection = obj.intersection;

        SimFrame frame;
        frame.frame = i;
        frame.view = view;
        std::mt19937_64 det_rng(splitmix64(view.noise_seed));
        auto det = render_object(world, obj, view, det_rng);
        if (opt.labeled) det.detection.supervised_label = obj.class_id;
        frame.detections.push_back(std::move(det));
        frames.push_back(std::move(frame));
    }
    return frames;
}

// ---------------------------------------------------------------------------
// JSON round-trips: scenario files and JSONL streams
// ---------------------------------------------------------------------------

inline void to_json(json& j, const ClassSpec& c) {
    j = json{{"id", c.class_id}, {"name", c.name}, {"center", c.center}};
}
inline void from_json(const json& j, ClassSpec& c) {
    j.at("id").get_to(c.class_id);
    j.at("name").get_to(c.name);
    j.at("center").get_to(c.center);
}

inline void to_json(json& j, const ObjectSetSpec& s) {
    j = json{{"id", to_string(s.id)},         {"classes", s.classes},
             {"spread", s.spread},            {"drift", s.drift},
             {"instances", s.instances},      {"ground_samples", s.ground_samples},
             {"aerial_samples", s.aerial_samples}};
}
inline void from_json(const json& j, ObjectSetSpec& s) {
    s.id = set_from_string(j.at("id").get<std::string>());
    j.at("classes").get_to(s.classes);
    j.at("spread").get_to(s.spread);
    j.at("drift").get_to(s.drift);
    j.at("instances").get_to(s.instances);
    j.at("ground_samples").get_to(s.ground_samples);
    j.at("aerial_samples").get_to(s.aerial_samples);
}

inline void to_json(json& j, const IntersectionSpec& s) {
    std::vector<std::string> sets;
    for (SetId id : s.sets) sets.push_back(to_string(id));
    j = json{{"pos", s.position}, {"sets", sets}};
}
inline void from_json(const json& j, IntersectionSpec& s) {
    j.at("pos").get_to(s.position);
    s.sets.clear();
    for (const auto& name : j.at("sets")) s.sets.push_back(set_from_string(name.get<std::string>()));
}

inline void to_json(json& j, const Scenario& sc) {
    j = json{
        {"raw_dim", sc.raw_dim},
        {"seed", sc.seed},
        {"sets", sc.sets},
        {"noise", {{"sigma_ground", sc.noise.sigma_ground}, {"sigma_aerial", sc.noise.sigma_aerial}}},
        {"mix",
         {{"max", sc.mix.max},
          {"full_altitude", sc.mix.full_altitude},
          {"sharpness", sc.mix.sharpness},
          {"az_floor", sc.mix.az_floor},
          {"az_gain", sc.mix.az_gain},
          {"blocks", sc.mix.blocks}}},
        {"objectness",
         {{"mean_ground", sc.objectness.mean_ground},
          {"mean_aerial", sc.objectness.mean_aerial},
          {"concentration", sc.objectness.concentration}}},
        {"altitudes",
         {{"ground", {sc.altitudes.ground_low, sc.altitudes.ground_high}},
          {"aerial", {sc.altitudes.aerial_low, sc.altitudes.aerial_high}},
          {"azimuths", sc.altitudes.azimuths}}},
        {"splits",
         {{"aerial_a_train", sc.splits.aerial_a_train},
          {"aerial_b_train", sc.splits.aerial_b_train},
          {"aerial_c_train", sc.splits.aerial_c_train}}},
        {"intersections", sc.intersections},
        {"spacing", sc.spacing},
        {"acquisition",
         {{"full_confidence_altitude", sc.acquisition.full_confidence_altitude},
          {"decay_per_meter", sc.acquisition.decay_per_meter}}}};
}

inline void from_json(const json& j, Scenario& sc) {
    j.at("raw_dim").get_to(sc.raw_dim);
    j.at("seed").get_to(sc.seed);
    j.at("sets").get_to(sc.sets);
    const auto& noise = j.at("noise");
    noise.at("sigma_ground").get_to(sc.noise.sigma_ground);
    noise.at("sigma_aerial").get_to(sc.noise.sigma_aerial);
    const auto& mix = j.at("mix");
    mix.at("max").get_to(sc.mix.max);
    mix.at("full_altitude").get_to(sc.mix.full_altitude);
    mix.at("sharpness").get_to(sc.mix.sharpness);
    mix.at("az_floor").get_to(sc.mix.az_floor);
    mix.at("az_gain").get_to(sc.mix.az_gain);
    mix.at("blocks").get_to(sc.mix.blocks);
    const auto& obj = j.at("objectness");
    obj.at("mean_ground").get_to(sc.objectness.mean_ground);
    obj.at("mean_aerial").get_to(sc.objectness.mean_aerial);
    obj.at("concentration").get_to(sc.objectness.concentration);
    const auto& alt = j.at("altitudes");
    sc.altitudes.ground_low = alt.at("ground")[0].get<double>();
    sc.altitudes.ground_high = alt.at("ground")[1].get<double>();
    sc.altitudes.aerial_low = alt.at("aerial")[0].get<double>();
    sc.altitudes.aerial_high = alt.at("aerial")[1].get<double>();
    alt.at("azimuths").get_to(sc.altitudes.azimuths);
    const auto& splits = j.at("splits");
    splits.at("aerial_a_train").get_to(sc.splits.aerial_a_train);
    splits.at("aerial_b_train").get_to(sc.splits.aerial_b_train);
    splits.at("aerial_c_train").get_to(sc.splits.aerial_c_train);
    j.at("intersections").get_to(sc.intersections);
    j.at("spacing").get_to(sc.spacing);
    const auto& acq = j.at("acquisition");
    acq.at("full_confidence_altitude").get_to(sc.acquisition.full_confidence_altitude);
    acq.at("decay_per_meter").get_to(sc.acquisition.decay_per_meter);
    sc.validate();
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed scenario file " + path + ": " + e.what());
    }
    return j.get<Scenario>();
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scenario file: " + path);
    out << json(sc).dump(2) << "\n";
}

inline void to_json(json& j, const ViewCondition& v) {
    j = json{{"alt", v.altitude},
             {"az", v.azimuth},
             {"seed", v.noise_seed},
             {"intersection", v.intersection}};
}
inline void from_json(const json& j, ViewCondition& v) {
    j.at("alt").get_to(v.altitude);
    j.at("az").get_to(v.azimuth);
    j.at("seed").get_to(v.noise_seed);
    j.at("intersection").get_to(v.intersection);
}

inline void to_json(json& j, const FrameDetection& d) {
    j = json{{"f", d.detection.features},
             {"obj", d.detection.objectness},
             {"id", d.detection.object_id},
             {"pos", d.detection.position},
             {"truth", d.truth}};
    if (d.detection.supervised_label)
        j["label"] = *d.detection.supervised_label;
    else
        j["label"] = nullptr;
}
inline void from_json(const json& j, FrameDetection& d) {
    j.at("f").get_to(d.detection.features);
    j.at("obj").get_to(d.detection.objectness);
    j.at("id").get_to(d.detection.object_id);
    j.at("pos").get_to(d.detection.position);
    j.at("truth").get_to(d.truth);
    if (j.contains("label") && !j.at("label").is_null())
        d.detection.supervised_label = j.at("label").get<int>();
    else
        d.detection.supervised_label.reset();
}

inline void to_json(json& j, const SimFrame& f) {
    j = json{{"frame", f.frame}, {"view", f.view}, {"dets", f.detections}};
}
inline void from_json(const json& j, SimFrame& f) {
    j.at("frame").get_to(f.frame);
    j.at("view").get_to(f.view);
    j.at("dets").get_to(f.detections);
}

inline void write_stream(const std::vector<SimFrame>& frames, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write stream file: " + path);
    for (const auto& frame : frames) out << json(frame).dump() << "\n";
}

inline std::vector<SimFrame> read_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stream file: " + path);
    std::vector<SimFrame> frames;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            frames.push_back(json::parse(line).get<SimFrame>());
        } catch (const json::exception& e) {
            throw IoError(path + ":" + std::to_string(line_no) + ": bad frame: " + e.what());
        }
    }
    return frames;
}

/// CSV of (set, class, altitude, feature columns); one row per object x view.
inline void export_features(const World& world, const std::vector<ViewCondition>& views,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write feature export: " + path);
    out << "set,class,altitude";
    for (int i = 0; i < world.scenario.raw_dim; ++i) out << ",f" << i;
    out << "\n";
    for (const auto& obj : world.objects) {
        for (const auto& view : views) {
            std::mt19937_64 rng(splitmix64(view.noise_seed ^
                                           static_cast<std::uint64_t>(obj.object_id + 1)));
            const auto f = view_transform(world.scenario, obj.set, obj.base, view, rng);
            out << to_string(obj.set) << "," << obj.class_id << "," << view.altitude;
            for (double v : f) out << "," << v;
            out << "\n";
        }
    }
}

}  // namespace artgate::sim
