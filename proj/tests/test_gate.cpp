#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "artgate/uncertainty.hpp"

using namespace artgate;

namespace {

Detection make_det(FeatureVector features, double objectness = 1.0,
                   std::optional<int> label = std::nullopt, std::int64_t object_id = 0) {
    Detection det;
    det.features = std::move(features);
    det.objectness = objectness;
    det.object_id = object_id;
    det.supervised_label = label;
    return det;
}

UncertaintyGate make_gate(std::size_t raw_dim = 2) {
    return UncertaintyGate(raw_dim, ArtmapParams{}, UncertaintyCriteria{});
}

std::uint64_t state_digest(const UncertaintyGate& gate) {
    Fnv1aDigest digest;
    for (std::size_t j = 0; j < gate.network().node_count(); ++j) {
        const auto& node = gate.network().node(static_cast<int>(j));
        digest.update(static_cast<std::int64_t>(node.label));
        digest.update(node.support_count);
        for (double w : node.weights) digest.update(w);
    }
    for (const auto& rec : gate.registry().records()) {
        digest.update(static_cast<std::int64_t>(rec.index));
        digest.update(rec.support_count);
        digest.update(static_cast<std::int64_t>(rec.active));
        digest.update(rec.human_label ? *rec.human_label : std::string("-"));
    }
    return digest.value();
}

}  // namespace

TEST_CASE("criteria ranges are enforced") {
    UncertaintyCriteria criteria;
    criteria.psi5 = 1.0;
    REQUIRE_THROWS_AS(UncertaintyGate(2, ArtmapParams{}, criteria), ConfigError);
    criteria = {};
    criteria.buffer_len = 0;
    REQUIRE_THROWS_AS(UncertaintyGate(2, ArtmapParams{}, criteria), ConfigError);
}

TEST_CASE("registry indices stay dense and are never reused") {
    ClassRegistry registry;
    registry.register_supervised("one");
    REQUIRE_THROWS_AS(registry.ensure_supervised(5), DomainError);
    registry.ensure_supervised(2);
    REQUIRE(registry.size() == 2);

    std::vector<ClassRecord> gapped = registry.records();
    gapped[1].index = 7;
    ClassRegistry fresh;
    REQUIRE_THROWS_AS(fresh.restore(gapped), DomainError);
}

TEST_CASE("objectness gate thresholds") {
    REQUIRE_FALSE(gate_detection(make_det({0.5, 0.5}, 0.3), 0.5));
    REQUIRE(gate_detection(make_det({0.5, 0.5}, 0.9), 0.5));
    REQUIRE(gate_detection(make_det({0.5, 0.5}, 0.5), 0.5));  // equality passes
}

TEST_CASE("overlap is containment-normalized") {
    const auto a = complement_code({0.2, 0.7});
    REQUIRE(overlap(a, a.values) == Catch::Approx(1.0).margin(kFloatTol));
    // |A ∧ w| = 1.5, |A| = 2, |w| = 1.5 -> 1.5 / min(2, 1.5) = 1.0
    REQUIRE(overlap(a, {0.1, 0.5, 0.6, 0.3}) == Catch::Approx(1.0).margin(kFloatTol));
}

TEST_CASE("similarity stage scans the top-ranked candidates") {
    auto gate = make_gate();
    const auto a = complement_code({0.2, 0.7});

    SECTION("empty candidate set yields none") {
        REQUIRE(gate.similarity_stage(a, {}) == -1);
    }
    SECTION("first passing node in rank order wins") {
        gate.registry().register_supervised("one");
        gate.registry().register_supervised("two");
        const int n0 = gate.network().commit_new_node(complement_code({0.9, 0.05}), 1);
        const int n1 = gate.network().commit_new_node(a, 2);
        REQUIRE(gate.similarity_stage(a, {n0, n1}) == n1);
    }
    SECTION("fanout caps how many nodes are examined") {
        auto& net = gate.network();
        gate.criteria().similarity_fanout = 1;
        const int far = net.commit_new_node(complement_code({0.95, 0.02}), 1);
        const int near = net.commit_new_node(a, 1);
        REQUIRE(gate.similarity_stage(a, {far, near}) == -1);
    }
}

TEST_CASE("low objectness short-circuits, buffers untouched") {
    auto gate = make_gate();
    gate.set_use_buffers(true);
    const auto decision = gate.evaluate_detection(make_det({0.5, 0.5}, 0.1), LearnMode::Supervised, 0);
    REQUIRE(decision.kind == GateDecision::Kind::RejectedDetection);
    REQUIRE(gate.buffers().empty());
    REQUIRE(gate.network().node_count() == 0);
}

TEST_CASE("empty network in unsupervised mode creates class 1") {
    auto gate = make_gate();
    const auto decision = gate.evaluate_detection(make_det({0.4, 0.6}), LearnMode::Unsupervised, 0);
    REQUIRE(decision.kind == GateDecision::Kind::NewClassCreated);
    REQUIRE(decision.category == 1);
    REQUIRE(gate.registry().size() == 1);
    REQUIRE(gate.registry().record(1).origin == ClassOrigin::SelfGenerated);
}

TEST_CASE("near-duplicate resonates into the one-shot class instead of splitting") {
    auto gate = make_gate();
    gate.evaluate_detection(make_det({0.4, 0.6}), LearnMode::Unsupervised, 0);
    const auto again = gate.evaluate_detection(make_det({0.401, 0.6}), LearnMode::Unsupervised, 1);
    REQUIRE(again.kind == GateDecision::Kind::Hypothesis);
    REQUIRE(again.category == 1);
    REQUIRE(again.diag.path == DecisionPath::Resonance);
    REQUIRE(gate.registry().size() == 1);
}

TEST_CASE("supervised mismatch match-tracks into the right label") {
    auto gate = make_gate();
    gate.registry().register_supervised("one");
    gate.registry().register_supervised("two");
    gate.network().commit_new_node(complement_code({0.5, 0.5}), 1);

    const auto decision =
        gate.evaluate_detection(make_det({0.5, 0.5}, 1.0, 2), LearnMode::Supervised, 0);
    REQUIRE(decision.diag.match_tracked >= 1);
    REQUIRE(decision.category == 2);
    // The sample ended up in a node carrying the supervised label.
    bool found = false;
    for (std::size_t j = 0; j < gate.network().node_count(); ++j)
        if (gate.network().node(static_cast<int>(j)).label == 2) found = true;
    REQUIRE(found);
}

TEST_CASE("vigilance resets to psi2 between detections") {
    auto gate = make_gate();
    gate.registry().register_supervised("one");
    gate.registry().register_supervised("two");
    // First detection match-tracks rho up to ~1.0; the second must start back
    // at psi2 and resonate normally.
    gate.network().commit_new_node(complement_code({0.5, 0.5}), 1);
    gate.evaluate_detection(make_det({0.5, 0.5}, 1.0, 2), LearnMode::Supervised, 0);
    const auto second =
        gate.evaluate_detection(make_det({0.52, 0.52}, 1.0, 1), LearnMode::Supervised, 1);
    REQUIRE(second.category == 1);
    REQUIRE(second.diag.path == DecisionPath::Resonance);
}

TEST_CASE("hypothesis buffers fill and decay") {
    auto gate = make_gate();
    gate.set_use_buffers(true);

    SECTION("ten consecutive sightings fill the ring") {
        for (int f = 0; f < 10; ++f) gate.push_hypothesis(7, 3, f);
        const auto& slots = gate.buffers().at(7).slots();
        REQUIRE(slots.size() == 10);
        REQUIRE(std::count(slots.begin(), slots.end(), 3) == 10);
    }
    SECTION("ten unseen frames decay to all zeros") {
        for (int f = 0; f < 10; ++f) gate.push_hypothesis(7, 3, f);
        for (int f = 10; f < 20; ++f) gate.decay_buffers(f);
        const auto& slots = gate.buffers().at(7).slots();
        REQUIRE(std::count(slots.begin(), slots.end(), 0) == 10);
    }
    SECTION("seen 7 of the last 10 frames") {
        for (int f = 0; f < 10; ++f) {
            if (f % 3 != 2) gate.push_hypothesis(7, 3, f);
            gate.decay_buffers(f);
        }
        const auto& slots = gate.buffers().at(7).slots();
        REQUIRE(std::count(slots.begin(), slots.end(), 3) == 7);
        REQUIRE(std::count(slots.begin(), slots.end(), 0) == 3);
    }
}

TEST_CASE("persistence finalization thresholds on modal frequency") {
    auto gate = make_gate();
    gate.set_use_buffers(true);
    gate.registry().register_supervised("three");
    gate.registry().register_supervised("x");
    gate.registry().register_supervised("y");

    SECTION("seven of ten passes at 0.6") {
        for (int f = 0; f < 7; ++f) gate.push_hypothesis(1, 3, f);
        for (int f = 7; f < 10; ++f) gate.push_hypothesis(1, 0, f);
        REQUIRE(gate.persistence_finalize(1) == 3);
    }
    SECTION("five of ten fails at 0.6") {
        for (int f = 0; f < 5; ++f) gate.push_hypothesis(1, 3, f);
        for (int f = 5; f < 10; ++f) gate.push_hypothesis(1, 0, f);
        REQUIRE(gate.persistence_finalize(1) == -1);
    }
    SECTION("all zeros has no modal category") {
        for (int f = 0; f < 10; ++f) gate.push_hypothesis(1, 0, f);
        REQUIRE(gate.persistence_finalize(1) == -1);
    }
}

TEST_CASE("persistence gate equals brute-force modal counting") {
    std::mt19937_64 rng(5150);
    std::uniform_int_distribution<int> cat(0, 4);
    for (int trial = 0; trial < 500; ++trial) {
        auto gate = make_gate();
        gate.set_use_buffers(true);
        for (int i = 0; i < 4; ++i) gate.registry().register_supervised("c" + std::to_string(i));
        std::vector<int> contents;
        for (int f = 0; f < 10; ++f) {
            contents.push_back(cat(rng));
            gate.push_hypothesis(1, contents.back(), f);
        }
        // Brute-force: count every nonzero category, lowest wins ties.
        int best_cat = 0, best_count = 0;
        for (int c = 1; c <= 4; ++c) {
            const int n = static_cast<int>(std::count(contents.begin(), contents.end(), c));
            if (n > best_count) {
                best_count = n;
                best_cat = c;
            }
        }
        const int expected = (best_cat != 0 && best_count / 10.0 >= 0.6) ? best_cat : -1;
        REQUIRE(gate.persistence_finalize(1) == expected);
    }
}

TEST_CASE("relevance pruning deactivates unsupported self-generated classes") {
    auto gate = make_gate();
    gate.criteria().psi4 = 0.06;
    gate.criteria().relevance_window = 50;  // threshold ceil(0.06*50) = 3

    SECTION("support 1 is pruned at created+W") {
        // Self-generated class created at frame 100 with a single sample.
        const auto a = complement_code({0.3, 0.3});
        gate.one_shot_create(a, 100);
        gate.relevance_prune(149);
        REQUIRE(gate.registry().class_active(1));
        gate.relevance_prune(150);
        REQUIRE_FALSE(gate.registry().class_active(1));
    }
    SECTION("support 5 stays active") {
        const auto a = complement_code({0.3, 0.3});
        const int cls = gate.one_shot_create(a, 100);
        for (int i = 0; i < 4; ++i) gate.registry().add_support(cls);
        gate.relevance_prune(150);
        REQUIRE(gate.registry().class_active(cls));
    }
    SECTION("supervised classes are never pruned") {
        gate.registry().register_supervised("sup", 100);
        gate.relevance_prune(1000);
        REQUIRE(gate.registry().class_active(1));
    }
}

TEST_CASE("pruned classes never re-enter candidate sets") {
    auto gate = make_gate();
    const auto sample = make_det({0.3, 0.3});
    gate.evaluate_detection(sample, LearnMode::Unsupervised, 0);
    REQUIRE(gate.registry().size() == 1);

    gate.relevance_prune(50);  // support 1 < 3 -> inactive
    REQUIRE_FALSE(gate.registry().class_active(1));

    // Frozen evaluation cannot see the pruned class.
    const auto frozen = gate.evaluate_detection(sample, LearnMode::Frozen, 51);
    REQUIRE(frozen.category == 0);
    REQUIRE(frozen.kind == GateDecision::Kind::Unknown);

    // Learning re-derives a fresh class; the old index is never reused.
    const auto relearn = gate.evaluate_detection(sample, LearnMode::Unsupervised, 52);
    REQUIRE(relearn.kind == GateDecision::Kind::NewClassCreated);
    REQUIRE(relearn.category == 2);
}

TEST_CASE("label request flags") {
    auto gate = make_gate();
    const int a = gate.one_shot_create(complement_code({0.2, 0.2}), 0);
    const int b = gate.one_shot_create(complement_code({0.8, 0.8}), 0);
    const int c = gate.one_shot_create(complement_code({0.5, 0.9}), 0);
    gate.registry().add_support(a);
    gate.registry().add_support(a);  // support 3 -> flagged
    for (int i = 0; i < 4; ++i) gate.registry().add_support(c);  // support 5
    gate.registry().assign_human_label({c}, "labeled");

    const auto flagged = gate.registry().flag_label_requests();
    REQUIRE(flagged == std::vector<int>{a});
    REQUIRE(gate.registry().record(b).support_count == 1);
}

TEST_CASE("assigning a human label is metadata-only") {
    auto gate = make_gate();
    const int c1 = gate.one_shot_create(complement_code({0.2, 0.2}), 0);
    const int c2 = gate.one_shot_create(complement_code({0.8, 0.8}), 0);
    const int c3 = gate.one_shot_create(complement_code({0.5, 0.9}), 0);

    const auto query = complement_code({0.21, 0.2});
    const auto before = gate.network().classify(query);

    gate.registry().assign_human_label({c1, c2}, "fire_truck");
    const auto after = gate.network().classify(query);

    REQUIRE(before.winner == after.winner);
    REQUIRE(before.activation == after.activation);
    REQUIRE(before.match == after.match);
    REQUIRE(gate.registry().display_name(c1) == "fire_truck");
    REQUIRE(gate.registry().display_name(c2) == "fire_truck");
    REQUIRE(gate.registry().display_name(c3) == "unknown-" + std::to_string(c3));

    REQUIRE_THROWS_AS(gate.registry().assign_human_label({99}, "x"), NotFoundError);
}

TEST_CASE("frozen mode leaves every learnable byte unchanged") {
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto gate = make_gate(4);
    gate.registry().register_supervised("one");
    gate.registry().register_supervised("two");
    for (int i = 0; i < 40; ++i) {
        const FeatureVector f{u(rng), u(rng), u(rng), u(rng)};
        gate.evaluate_detection(make_det(f, 1.0, 1 + static_cast<int>(rng() % 2)),
                                LearnMode::Supervised, i);
    }

    const auto digest_before = state_digest(gate);
    for (int i = 0; i < 100; ++i) {
        const FeatureVector f{u(rng), u(rng), u(rng), u(rng)};
        gate.evaluate_detection(make_det(f), LearnMode::Frozen, 100 + i);
    }
    REQUIRE(state_digest(gate) == digest_before);
}

TEST_CASE("ladder exclusivity and supervision correctness over random streams") {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto gate = make_gate(4);
    for (int i = 0; i < 3; ++i) gate.registry().register_supervised("c" + std::to_string(i));

    for (int i = 0; i < 400; ++i) {
        const FeatureVector f{u(rng), u(rng), u(rng), u(rng)};
        const int label = 1 + static_cast<int>(rng() % 3);
        const auto decision =
            gate.evaluate_detection(make_det(f, 1.0, label), LearnMode::Supervised, i);
        // Exactly one of the three learning paths fired.
        REQUIRE(decision.diag.path != DecisionPath::None);
        const bool resonance = decision.diag.path == DecisionPath::Resonance;
        const bool similarity = decision.diag.path == DecisionPath::Similarity;
        const bool commit = decision.diag.path == DecisionPath::Commit;
        REQUIRE((resonance ? 1 : 0) + (similarity ? 1 : 0) + (commit ? 1 : 0) == 1);
        REQUIRE(decision.diag.similarity_used == similarity);
        // Whenever a supervised decision learns, it learns the right label.
        REQUIRE(decision.category == label);
    }
    // All nodes carry labels from the supervised space.
    for (std::size_t j = 0; j < gate.network().node_count(); ++j) {
        const int l = gate.network().node(static_cast<int>(j)).label;
        REQUIRE((l >= 1 && l <= 3));
    }
}
