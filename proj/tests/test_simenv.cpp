#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "artgate/experiments.hpp"
#include "artgate/simenv.hpp"

using namespace artgate;
using namespace artgate::sim;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// Euclidean nearest-centroid classifier used as the separability oracle.
struct CentroidOracle {
    std::vector<FeatureVector> centroids;
    static double dist2(const FeatureVector& a, const FeatureVector& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s;
    }
    int classify(const FeatureVector& f) const {
        int best = -1;
        double best_d = 0.0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d = dist2(f, centroids[c]);
            if (best < 0 || d < best_d) {
                best = static_cast<int>(c);
                best_d = d;
            }
        }
        return best;
    }
};

FeatureVector centroid_of(const std::vector<FeatureVector>& xs) {
    FeatureVector c(xs.front().size(), 0.0);
    for (const auto& x : xs)
        for (std::size_t i = 0; i < x.size(); ++i) c[i] += x[i];
    for (auto& v : c) v /= static_cast<double>(xs.size());
    return c;
}

bool is_a_class(int cls) { return cls >= 1 && cls <= 3; }
bool is_b_class(int cls) { return cls >= 4 && cls <= 6; }

}  // namespace

TEST_CASE("world construction is deterministic per seed") {
    const auto scenario = default_scenario();
    const auto w1 = build_world(scenario, 42);
    const auto w2 = build_world(scenario, 42);
    REQUIRE(w1.objects.size() == w2.objects.size());
    for (std::size_t i = 0; i < w1.objects.size(); ++i) {
        REQUIRE(w1.objects[i].base == w2.objects[i].base);
        REQUIRE(w1.objects[i].position == w2.objects[i].position);
        REQUIRE(w1.objects[i].class_id == w2.objects[i].class_id);
    }
    const auto w3 = build_world(scenario, 43);
    REQUIRE(w1.objects.front().base != w3.objects.front().base);
}

TEST_CASE("world instances follow the scenario and the intersection layout") {
    const auto scenario = default_scenario();
    const auto world = build_world(scenario, 42);
    std::map<SetId, int> counts;
    for (const auto& obj : world.objects) counts[obj.set] += 1;
    for (const auto& set : scenario.sets) REQUIRE(counts[set.id] == set.instances);

    // Intersections hold {A+O}, {A+B+O}, {C}.
    std::map<int, std::set<SetId>> present;
    for (const auto& obj : world.objects) present[obj.intersection].insert(obj.set);
    REQUIRE(present[0] == std::set<SetId>{SetId::A, SetId::O});
    REQUIRE(present[1] == std::set<SetId>{SetId::A, SetId::B, SetId::O});
    REQUIRE(present[2] == std::set<SetId>{SetId::C});

    // Objects stay far enough apart for unambiguous spatial association.
    for (const auto& a : world.objects)
        for (const auto& b : world.objects)
            if (a.object_id != b.object_id && a.intersection == b.intersection)
                REQUIRE(distance(a.position, b.position) > 4.0);
}

TEST_CASE("an empty scenario renders empty frames") {
    Scenario scenario = default_scenario();
    for (auto& set : scenario.sets) set.instances = 0;
    const auto world = build_world(scenario, 1);
    REQUIRE(world.objects.empty());
    ViewCondition view;
    view.intersection = -1;
    const auto frame = render_frame(world, view, 0);
    REQUIRE(frame.detections.empty());
}

TEST_CASE("view transform is the identity at altitude zero without noise") {
    Scenario scenario = default_scenario();
    scenario.noise.sigma_ground = 0.0;
    const auto world = build_world(scenario, 42);
    const auto& obj = world.objects.front();
    std::mt19937_64 rng(1);
    ViewCondition ground;
    ground.altitude = 0.0;
    const auto f = view_transform(scenario, obj.set, obj.base, ground, rng);
    REQUIRE(f == obj.base);
}

TEST_CASE("altitude 30 applies the full drift along the set direction") {
    Scenario scenario = default_scenario();
    scenario.noise.sigma_ground = 0.0;
    scenario.noise.sigma_aerial = 0.0;
    scenario.mix.max = 0.0;  // isolate the drift term
    const auto world = build_world(scenario, 42);
    const auto& obj = world.objects.front();
    std::mt19937_64 rng(1);
    ViewCondition aerial;
    aerial.altitude = 30.0;
    const auto f = view_transform(scenario, obj.set, obj.base, aerial, rng);
    const auto& drift = scenario.set(obj.set).drift;
    for (std::size_t i = 0; i < f.size(); ++i)
        REQUIRE(f[i] == Catch::Approx(clamp01(obj.base[i] + drift[i])).margin(kFloatTol));
}

TEST_CASE("rendering the same frame twice is bit-identical") {
    const auto scenario = default_scenario();
    const auto world = build_world(scenario, 42);
    ViewCondition view;
    view.altitude = 20.0;
    view.azimuth = 45.0;
    view.noise_seed = 77;
    view.intersection = 0;
    const auto f1 = render_frame(world, view, 3);
    const auto f2 = render_frame(world, view, 3);
    REQUIRE(nlohmann::json(f1) == nlohmann::json(f2));
    const auto f3 = render_frame(world, view, 4);
    REQUIRE(nlohmann::json(f1) != nlohmann::json(f3));
}

TEST_CASE("a view of one intersection only sees its objects") {
    const auto scenario = default_scenario();
    const auto world = build_world(scenario, 42);
    ViewCondition view;
    view.altitude = 1.5;
    view.intersection = 0;
    const auto frame = render_frame(world, view, 0);
    REQUIRE_FALSE(frame.detections.empty());
    for (const auto& det : frame.detections) {
        const auto& obj = world.objects[static_cast<std::size_t>(det.detection.object_id)];
        REQUIRE(obj.intersection == 0);
    }
}

TEST_CASE("objectness declines with altitude") {
    const auto scenario = default_scenario();
    const auto world = build_world(scenario, 42);
    auto mean_objectness = [&](double altitude) {
        ViewCondition view;
        view.altitude = altitude;
        view.noise_seed = 5;
        view.intersection = 0;
        double sum = 0.0;
        long n = 0;
        for (int f = 0; f < 100; ++f) {
            const auto frame = render_frame(world, view, f);
            for (const auto& det : frame.detections) {
                sum += det.detection.objectness;
                ++n;
            }
        }
        return sum / static_cast<double>(n);
    };
    const double low = mean_objectness(2.0);
    const double high = mean_objectness(30.0);
    REQUIRE(high < low);
    REQUIRE(low > 0.8);
    REQUIRE(high > 0.55);  // still nearly always above the detection gate
}

TEST_CASE("emitted features stay inside the unit interval") {
    const auto scenario = default_scenario();
    const auto world = build_world(scenario, 42);
    StreamOptions opt;
    opt.sets = {SetId::A, SetId::B, SetId::O, SetId::C};
    opt.count = 500;
    opt.aerial = true;
    opt.seed = 9;
    for (const auto& frame : make_sample_stream(world, opt))
        for (const auto& det : frame.detections)
            for (double v : det.detection.features) REQUIRE((v >= 0.0 && v <= 1.0));
}

TEST_CASE("stream files round-trip exactly") {
    const auto scenario = default_scenario();
    const auto world = build_world(scenario, 42);
    StreamOptions opt;
    opt.sets = {SetId::A};
    opt.count = 25;
    opt.aerial = true;
    opt.seed = 12;
    const auto frames = make_sample_stream(world, opt);

    const auto path = temp_path("artgate_stream_roundtrip.jsonl");
    write_stream(frames, path);
    const auto loaded = read_stream(path);
    REQUIRE(nlohmann::json(frames) == nlohmann::json(loaded));
    std::filesystem::remove(path);
}

TEST_CASE("scenario files round-trip through JSON") {
    const auto scenario = default_scenario();
    const auto path = temp_path("artgate_scenario_roundtrip.json");
    save_scenario(scenario, path);
    const auto loaded = load_scenario(path);
    REQUIRE(nlohmann::json(scenario) == nlohmann::json(loaded));
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(load_scenario(temp_path("missing_scenario.json")), IoError);
}

#ifdef ARTGATE_SOURCE_DIR
TEST_CASE("the shipped scenario file matches the built-in default") {
    const auto shipped =
        load_scenario(std::string(ARTGATE_SOURCE_DIR) + "/configs/scenario_default.json");
    REQUIRE(nlohmann::json(shipped) == nlohmann::json(default_scenario()));
}
#endif

TEST_CASE("feature export covers all sets and mirrors the cluster geometry") {
    const auto scenario = default_scenario();
    const auto world = build_world(scenario, 42);
    std::vector<ViewCondition> views;
    for (int k = 0; k < 3; ++k) {
        ViewCondition v;
        v.altitude = 20.0;
        v.azimuth = 0.0;
        v.noise_seed = 100 + static_cast<std::uint64_t>(k);
        views.push_back(v);
    }
    const auto path = temp_path("artgate_features.csv");
    export_features(world, views, path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line.rfind("set,class,altitude", 0) == 0);
    std::size_t rows = 0;
    std::set<char> sets_seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        sets_seen.insert(line[0]);
        ++rows;
    }
    REQUIRE(rows == world.objects.size() * views.size());
    REQUIRE(sets_seen == std::set<char>{'A', 'B', 'C', 'O'});
    std::filesystem::remove(path);
}

TEST_CASE("calibration: aerial cluster structure matches the transfer story") {
    const auto scenario = default_scenario();
    const auto bundle = exp::generate_data(scenario, scenario.seed);

    // Pool aerial vehicle samples by set.
    std::vector<FeatureVector> a_samples, b_samples, c_samples;
    auto collect = [&](const std::vector<SimFrame>& frames) {
        for (const auto& f : frames)
            for (const auto& det : f.detections) {
                if (is_a_class(det.truth)) a_samples.push_back(det.detection.features);
                if (is_b_class(det.truth)) b_samples.push_back(det.detection.features);
                if (det.truth == 13) c_samples.push_back(det.detection.features);
            }
    };
    collect(bundle.aerial_a_train);
    collect(bundle.aerial_a_test);
    collect(bundle.aerial_b_train);
    collect(bundle.aerial_b_test);
    collect(bundle.aerial_c_test);
    REQUIRE(a_samples.size() > 100);
    REQUIRE(b_samples.size() > 100);
    REQUIRE(c_samples.size() > 100);

    SECTION("sets A and B overlap aerially (nearest-centroid error >= 15%)") {
        CentroidOracle oracle;
        oracle.centroids = {centroid_of(a_samples), centroid_of(b_samples)};
        long wrong = 0;
        for (const auto& s : a_samples)
            if (oracle.classify(s) != 0) ++wrong;
        for (const auto& s : b_samples)
            if (oracle.classify(s) != 1) ++wrong;
        const double err =
            static_cast<double>(wrong) / static_cast<double>(a_samples.size() + b_samples.size());
        INFO("A/B nearest-centroid error = " << err);
        REQUIRE(err >= 0.15);
    }

    SECTION("set C separates linearly from A and B (error <= 2%)") {
        std::vector<FeatureVector> ab = a_samples;
        ab.insert(ab.end(), b_samples.begin(), b_samples.end());
        CentroidOracle oracle;
        oracle.centroids = {centroid_of(ab), centroid_of(c_samples)};
        long wrong = 0;
        for (const auto& s : ab)
            if (oracle.classify(s) != 0) ++wrong;
        for (const auto& s : c_samples)
            if (oracle.classify(s) != 1) ++wrong;
        const double err =
            static_cast<double>(wrong) / static_cast<double>(ab.size() + c_samples.size());
        INFO("C vs A+B nearest-centroid error = " << err);
        REQUIRE(err <= 0.02);
    }

    SECTION("C sits farther from A than B does, in raw feature space") {
        const auto ca = centroid_of(a_samples);
        const auto cb = centroid_of(b_samples);
        const auto cc = centroid_of(c_samples);
        REQUIRE(CentroidOracle::dist2(cc, ca) > CentroidOracle::dist2(ca, cb));
    }
}

TEST_CASE("calibration: ground training transfers poorly to the air") {
    const auto scenario = default_scenario();
    const auto bundle = exp::generate_data(scenario, scenario.seed);

    auto gate = exp::make_gate(scenario);
    exp::train_stream(gate, bundle.ground_all, LearnMode::Supervised);

    const auto ground = exp::eval_stream(gate, bundle.ground_all, scenario);
    INFO("ground accuracy = " << ground.accuracy_pct());
    REQUIRE(ground.accuracy_pct() >= 95.0);

    const auto aerial = exp::eval_stream(gate, bundle.aerial_a_test, scenario);
    INFO("aerial accuracy before adaptation = " << aerial.accuracy_pct());
    REQUIRE(aerial.accuracy_pct() <= 35.0);

    // The same bounds hold at fixed altitudes: near-perfect at ground level,
    // degraded at 25-30 m.
    auto fixed_altitude_eval = [&](double altitude) {
        StreamOptions opt;
        opt.sets = {SetId::A};
        opt.count = 150;
        opt.aerial = true;
        opt.labeled = true;
        opt.seed = 515;
        opt.fixed_altitude = altitude;
        const auto frames = make_sample_stream(bundle.world, opt);
        return exp::eval_stream(gate, frames, scenario).accuracy_pct();
    };
    REQUIRE(fixed_altitude_eval(0.0) >= 95.0);
    REQUIRE(fixed_altitude_eval(25.0) <= 35.0);
    REQUIRE(fixed_altitude_eval(30.0) <= 35.0);
}
