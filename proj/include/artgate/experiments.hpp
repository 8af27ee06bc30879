#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artgate/common.hpp"
#include "artgate/simenv.hpp"
#include "artgate/snapshot.hpp"
#include "artgate/spatial.hpp"
#include "artgate/uncertainty.hpp"

namespace artgate::exp {

using sim::SimFrame;

// ---------------------------------------------------------------------------
// Evaluation and training primitives
// ---------------------------------------------------------------------------

struct EvalResult {
    long correct = 0;
    long total = 0;
    long unknown = 0;
    std::uint64_t decision_digest = 0;

    double accuracy_pct() const {
        return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    }
};

/// Frozen pass over a stream; scores the decision label's display name
/// against the ground-truth class name. Unknown counts as incorrect.
inline EvalResult eval_stream(UncertaintyGate& gate, const std::vector<SimFrame>& frames,
                              const sim::Scenario& scenario) {
    EvalResult result;
    Fnv1aDigest digest;
    for (const auto& frame : frames) {
        for (const auto& det : frame.detections) {
            const auto decision =
                gate.evaluate_detection(det.detection, LearnMode::Frozen, frame.frame);
            std::string predicted = "?";
            if (decision.category > 0)
                predicted = gate.registry().display_name(decision.category);
            else
                ++result.unknown;
            const std::string truth = scenario.class_name(det.truth);
            if (predicted == truth) ++result.correct;
            ++result.total;
            digest.update(frame.frame);
            digest.update(det.detection.object_id);
            digest.update(predicted);
        }
    }
    result.decision_digest = digest.value();
    return result;
}

struct TrainStats {
    long samples = 0;
    long new_classes = 0;
    long resets = 0;
    long match_tracked = 0;
    long similarity_learns = 0;
    long node_commits = 0;
    bool first_sample_created_class = false;
};

inline TrainStats train_stream(UncertaintyGate& gate, const std::vector<SimFrame>& frames,
                               LearnMode mode, std::int64_t frame_offset = 0) {
    TrainStats stats;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::int64_t frame_no = frame_offset + static_cast<std::int64_t>(i);
        for (const auto& det : frames[i].detections) {
            const auto decision = gate.evaluate_detection(det.detection, mode, frame_no);
            ++stats.samples;
            stats.resets += decision.diag.resets;
            stats.match_tracked += decision.diag.match_tracked;
            if (decision.kind == GateDecision::Kind::NewClassCreated) {
                ++stats.new_classes;
                if (stats.samples == 1) stats.first_sample_created_class = true;
            }
            if (decision.diag.path == DecisionPath::Similarity) ++stats.similarity_learns;
            if (decision.diag.path == DecisionPath::Commit) ++stats.node_commits;
        }
        gate.end_frame(frame_no);
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Metrics records (the Table 4/5/6 row shape) and CSV output
// ---------------------------------------------------------------------------

struct MetricsRecord {
    std::string experiment;
    std::string phase;
    double training_fraction = 0.0;  // percent of the phase's training stream
    std::map<std::string, double> accuracy;  // test-set name -> percent
    long new_classes = 0;
    long resets = 0;
    long match_tracked = 0;
    long label_requests = 0;
};

inline void write_metrics_csv(const std::vector<MetricsRecord>& records,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file: " + path);
    // Column union over all records keeps the table rectangular.
    std::vector<std::string> testsets;
    for (const auto& rec : records)
        for (const auto& [name, value] : rec.accuracy)
            if (std::find(testsets.begin(), testsets.end(), name) == testsets.end())
                testsets.push_back(name);
    std::sort(testsets.begin(), testsets.end());

    out << "experiment,phase,training_fraction";
    for (const auto& name : testsets) out << ",acc_" << name;
    out << ",new_classes,resets,match_tracked,label_requests\n";
    for (const auto& rec : records) {
        out << rec.experiment << "," << rec.phase << "," << rec.training_fraction;
        for (const auto& name : testsets) {
            auto it = rec.accuracy.find(name);
            out << ",";
            if (it != rec.accuracy.end()) out << it->second;
        }
        out << "," << rec.new_classes << "," << rec.resets << "," << rec.match_tracked << ","
            << rec.label_requests << "\n";
    }
}

inline void write_metrics_json(const std::vector<MetricsRecord>& records,
                               const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rec : records) {
        nlohmann::json j{{"experiment", rec.experiment},
                         {"phase", rec.phase},
                         {"training_fraction", rec.training_fraction},
                         {"accuracy", rec.accuracy},
                         {"new_classes", rec.new_classes},
                         {"resets", rec.resets},
                         {"match_tracked", rec.match_tracked},
                         {"label_requests", rec.label_requests}};
        arr.push_back(std::move(j));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file: " + path);
    out << arr.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Data generation: streams with the scenario's per-set counts and splits
// ---------------------------------------------------------------------------

struct DataBundle {
    sim::Scenario scenario;
    sim::World world;
    std::vector<SimFrame> ground_all;      // Sets A+B+O, labeled (train == eval stream)
    std::vector<SimFrame> aerial_a_train;  // Sets A+O aerial, 70%
    std::vector<SimFrame> aerial_a_test;
    std::vector<SimFrame> aerial_b_train;  // Set B aerial, 50%
    std::vector<SimFrame> aerial_b_test;
    std::vector<SimFrame> aerial_c_train;  // Set C aerial, 10%, labels stripped
    std::vector<SimFrame> aerial_c_test;
};

inline std::vector<SimFrame> shuffled_concat(std::vector<std::vector<SimFrame>> parts,
                                             std::uint64_t seed) {
    std::vector<SimFrame> all;
    for (auto& p : parts)
        for (auto& f : p) all.push_back(std::move(f));
    std::mt19937_64 rng(sim::splitmix64(seed));
    std::shuffle(all.begin(), all.end(), rng);
    for (std::size_t i = 0; i < all.size(); ++i) all[i].frame = static_cast<std::int64_t>(i);
    return all;
}

inline std::pair<std::vector<SimFrame>, std::vector<SimFrame>> split_stream(
    std::vector<SimFrame> frames, double train_fraction) {
    const auto cut = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(frames.size())));
    std::vector<SimFrame> train(frames.begin(), frames.begin() + static_cast<long>(cut));
    std::vector<SimFrame> test(frames.begin() + static_cast<long>(cut), frames.end());
    for (std::size_t i = 0; i < train.size(); ++i) train[i].frame = static_cast<std::int64_t>(i);
    for (std::size_t i = 0; i < test.size(); ++i) test[i].frame = static_cast<std::int64_t>(i);
    return {std::move(train), std::move(test)};
}

inline DataBundle generate_data(const sim::Scenario& scenario, std::uint64_t seed) {
    DataBundle bundle;
    bundle.scenario = scenario;
    bundle.world = sim::build_world(scenario, seed);

    auto per_set = [&](sim::SetId id, bool aerial, bool labeled, std::uint64_t salt) {
        sim::StreamOptions opt;
        opt.sets = {id};
        opt.count = aerial ? scenario.set(id).aerial_samples : scenario.set(id).ground_samples;
        opt.aerial = aerial;
        opt.labeled = labeled;
        opt.seed = sim::splitmix64(seed ^ salt);
        return sim::make_sample_stream(bundle.world, opt);
    };

    bundle.ground_all = shuffled_concat({per_set(sim::SetId::A, false, true, 0xA01),
                                         per_set(sim::SetId::B, false, true, 0xB01),
                                         per_set(sim::SetId::O, false, true, 0xF01)},
                                        seed ^ 0x111);

    auto aerial_ao = shuffled_concat({per_set(sim::SetId::A, true, true, 0xA02),
                                      per_set(sim::SetId::O, true, true, 0xF02)},
                                     seed ^ 0x222);
    std::tie(bundle.aerial_a_train, bundle.aerial_a_test) =
        split_stream(std::move(aerial_ao), scenario.splits.aerial_a_train);

    auto aerial_b = shuffled_concat({per_set(sim::SetId::B, true, true, 0xB02)}, seed ^ 0x333);
    std::tie(bundle.aerial_b_train, bundle.aerial_b_test) =
        split_stream(std::move(aerial_b), scenario.splits.aerial_b_train);

    auto aerial_c = shuffled_concat({per_set(sim::SetId::C, true, true, 0xC02)}, seed ^ 0x444);
    std::tie(bundle.aerial_c_train, bundle.aerial_c_test) =
        split_stream(std::move(aerial_c), scenario.splits.aerial_c_train);
    for (auto& frame : bundle.aerial_c_train)  // one-shot training is unsupervised
        for (auto& det : frame.detections) det.detection.supervised_label.reset();

    return bundle;
}

/// Fresh gate with the scenario's supervised classes pre-registered.
inline UncertaintyGate make_gate(const sim::Scenario& scenario, ArtmapParams params = {},
                                 UncertaintyCriteria criteria = {}) {
    UncertaintyGate gate(static_cast<std::size_t>(scenario.raw_dim), params, criteria);
    for (const auto& cls : scenario.supervised_classes()) {
        const int idx = gate.registry().register_supervised(cls.name);
        if (idx != cls.class_id)
            throw ConfigError("scenario class ids must be dense starting at 1 (got " +
                              std::to_string(cls.class_id) + " at slot " + std::to_string(idx) +
                              ")");
    }
    return gate;
}

// ---------------------------------------------------------------------------
// Curve runner: accuracy vs training fraction over named test sets
// ---------------------------------------------------------------------------

struct CurveRow {
    double fraction = 0.0;  // percent
    std::map<std::string, double> accuracy;
    TrainStats stats;  // cumulative
};

inline std::vector<CurveRow> run_curve(UncertaintyGate& gate,
                                       const std::vector<SimFrame>& train,
                                       const std::vector<std::pair<std::string, const std::vector<SimFrame>*>>& testsets,
                                       const sim::Scenario& scenario,
                                       const std::vector<double>& checkpoints, LearnMode mode,
                                       std::int64_t frame_offset = 0) {
    for (std::size_t i = 1; i < checkpoints.size(); ++i)
        if (checkpoints[i] <= checkpoints[i - 1])
            throw ConfigError("checkpoint percentages must be strictly increasing");
    if (!checkpoints.empty() && (checkpoints.front() <= 0.0 || checkpoints.back() > 100.0))
        throw ConfigError("checkpoint percentages must lie in (0,100]");

    std::vector<CurveRow> rows;
    auto eval_row = [&](double fraction, const TrainStats& stats) {
        CurveRow row;
        row.fraction = fraction;
        row.stats = stats;
        for (const auto& [name, frames] : testsets)
            row.accuracy[name] = eval_stream(gate, *frames, scenario).accuracy_pct();
        rows.push_back(std::move(row));
    };

    TrainStats cumulative;
    eval_row(0.0, cumulative);  // fraction-0 row is the pre-training evaluation

    std::size_t done = 0;
    for (double pct : checkpoints) {
        const auto target = static_cast<std::size_t>(
            std::llround(pct / 100.0 * static_cast<double>(train.size())));
        if (target > done) {
            std::vector<SimFrame> chunk(train.begin() + static_cast<long>(done),
                                        train.begin() + static_cast<long>(target));
            const auto stats =
                train_stream(gate, chunk, mode, frame_offset + static_cast<std::int64_t>(done));
            cumulative.samples += stats.samples;
            cumulative.new_classes += stats.new_classes;
            cumulative.resets += stats.resets;
            cumulative.match_tracked += stats.match_tracked;
            cumulative.similarity_learns += stats.similarity_learns;
            cumulative.node_commits += stats.node_commits;
            done = target;
        }
        eval_row(pct, cumulative);
    }
    return rows;
}

inline void write_curve_csv(const std::vector<CurveRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write curve file: " + path);
    std::vector<std::string> testsets;
    for (const auto& row : rows)
        for (const auto& [name, value] : row.accuracy)
            if (std::find(testsets.begin(), testsets.end(), name) == testsets.end())
                testsets.push_back(name);
    std::sort(testsets.begin(), testsets.end());
    out << "fraction";
    for (const auto& name : testsets) out << ",acc_" << name;
    out << ",new_classes,resets,match_tracked\n";
    for (const auto& row : rows) {
        out << row.fraction;
        for (const auto& name : testsets) {
            auto it = row.accuracy.find(name);
            out << ",";
            if (it != row.accuracy.end()) out << it->second;
        }
        out << "," << row.stats.new_classes << "," << row.stats.resets << ","
            << row.stats.match_tracked << "\n";
    }
}

// ---------------------------------------------------------------------------
// Experiment protocols
// ---------------------------------------------------------------------------

inline std::vector<double> default_checkpoints() {
    return {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
}

struct TransferResult {
    std::vector<MetricsRecord> records;
    std::vector<CurveRow> curve;
};

/// Domain transfer: sequential aerial A(+O) training on the ground-trained
/// model, re-testing ground and aerial test sets at every checkpoint.
inline TransferResult exp_transfer(UncertaintyGate& gate, const DataBundle& bundle,
                                   std::vector<double> checkpoints = default_checkpoints()) {
    TransferResult result;
    const std::vector<std::pair<std::string, const std::vector<SimFrame>*>> testsets{
        {"ground", &bundle.ground_all}, {"aerial_a", &bundle.aerial_a_test}};
    result.curve = run_curve(gate, bundle.aerial_a_train, testsets, bundle.scenario, checkpoints,
                             LearnMode::Supervised);

    auto row_to_record = [&](const CurveRow& row, const std::string& phase) {
        MetricsRecord rec;
        rec.experiment = "transfer";
        rec.phase = phase;
        rec.training_fraction = row.fraction;
        rec.accuracy = row.accuracy;
        rec.new_classes = row.stats.new_classes;
        rec.resets = row.stats.resets;
        rec.match_tracked = row.stats.match_tracked;
        return rec;
    };
    result.records.push_back(row_to_record(result.curve.front(), "initial"));
    result.records.push_back(row_to_record(result.curve.back(), "after_aerial_a"));
    return result;
}

struct BoundaryResult {
    std::vector<MetricsRecord> records;
    std::vector<CurveRow> curve_a;  // aerial A phase, with aerial B tracked
    std::vector<CurveRow> curve_b;  // aerial B phase
};

/// Class-boundary maintenance: the transfer phase followed by sequential
/// aerial B training, with ground / aerial A / aerial B tested throughout.
inline BoundaryResult exp_boundary(UncertaintyGate& gate, const DataBundle& bundle,
                                   std::vector<double> checkpoints = default_checkpoints()) {
    BoundaryResult result;
    const std::vector<std::pair<std::string, const std::vector<SimFrame>*>> testsets{
        {"ground", &bundle.ground_all},
        {"aerial_a", &bundle.aerial_a_test},
        {"aerial_b", &bundle.aerial_b_test}};

    result.curve_a = run_curve(gate, bundle.aerial_a_train, testsets, bundle.scenario,
                               checkpoints, LearnMode::Supervised);
    result.curve_b = run_curve(gate, bundle.aerial_b_train, testsets, bundle.scenario,
                               checkpoints, LearnMode::Supervised,
                               static_cast<std::int64_t>(bundle.aerial_a_train.size()));

    auto row_to_record = [&](const CurveRow& row, const std::string& phase) {
        MetricsRecord rec;
        rec.experiment = "boundary";
        rec.phase = phase;
        rec.training_fraction = row.fraction;
        rec.accuracy = row.accuracy;
        rec.new_classes = row.stats.new_classes;
        rec.resets = row.stats.resets;
        rec.match_tracked = row.stats.match_tracked;
        return rec;
    };
    result.records.push_back(row_to_record(result.curve_a.front(), "initial"));
    result.records.push_back(row_to_record(result.curve_a.back(), "after_aerial_a"));
    result.records.push_back(row_to_record(result.curve_b.back(), "after_aerial_b"));
    return result;
}

struct OneShotResult {
    std::vector<MetricsRecord> records;
    TrainStats train_stats;
    std::vector<int> flagged_classes;
};

/// Self-supervised one-shot learning: the post-boundary model sees unlabeled
/// Set C samples with the similarity tolerance lowered, then classes with
/// three or more supports are flagged for human labeling.
inline OneShotResult exp_oneshot(UncertaintyGate& gate, const DataBundle& bundle,
                                 double oneshot_psi3 = 0.6) {
    OneShotResult result;
    const std::vector<std::pair<std::string, const std::vector<SimFrame>*>> testsets{
        {"ground", &bundle.ground_all},
        {"aerial_a", &bundle.aerial_a_test},
        {"aerial_b", &bundle.aerial_b_test},
        {"aerial_c", &bundle.aerial_c_test}};

    auto snapshot_accuracies = [&](const std::string& phase, const TrainStats& stats) {
        MetricsRecord rec;
        rec.experiment = "oneshot";
        rec.phase = phase;
        rec.new_classes = stats.new_classes;
        rec.resets = stats.resets;
        rec.match_tracked = stats.match_tracked;
        rec.label_requests = static_cast<long>(gate.registry().flag_label_requests().size());
        for (const auto& [name, frames] : testsets)
            rec.accuracy[name] = eval_stream(gate, *frames, bundle.scenario).accuracy_pct();
        result.records.push_back(std::move(rec));
    };

    snapshot_accuracies("initial", {});

    const double saved_psi3 = gate.criteria().psi3;
    gate.criteria().psi3 = oneshot_psi3;
    result.train_stats = train_stream(gate, bundle.aerial_c_train, LearnMode::Unsupervised);
    gate.criteria().psi3 = saved_psi3;

    result.flagged_classes = gate.registry().flag_label_requests();
    snapshot_accuracies("after_c_training", result.train_stats);
    return result;
}

/// Applies one human label to a list of flagged classes (the post-analysis
/// step), then re-evaluates. Returns the Table-6 shaped record.
inline MetricsRecord apply_labels_and_eval(UncertaintyGate& gate, const DataBundle& bundle,
                                           const std::vector<int>& classes,
                                           const std::string& label) {
    gate.registry().assign_human_label(classes, label);
    MetricsRecord rec;
    rec.experiment = "oneshot";
    rec.phase = "after_labeling";
    rec.accuracy["ground"] = eval_stream(gate, bundle.ground_all, bundle.scenario).accuracy_pct();
    rec.accuracy["aerial_a"] =
        eval_stream(gate, bundle.aerial_a_test, bundle.scenario).accuracy_pct();
    rec.accuracy["aerial_b"] =
        eval_stream(gate, bundle.aerial_b_test, bundle.scenario).accuracy_pct();
    rec.accuracy["aerial_c"] =
        eval_stream(gate, bundle.aerial_c_test, bundle.scenario).accuracy_pct();
    rec.label_requests = static_cast<long>(gate.registry().flag_label_requests().size());
    return rec;
}

// ---------------------------------------------------------------------------
// Multi-height generalization
// ---------------------------------------------------------------------------

struct HeightsConfig {
    std::vector<double> single_heights{15.0, 25.0};
    std::vector<double> eval_altitudes{0.0, 5.0, 15.0, 20.0, 25.0, 30.0};
    int train_samples_per_height = 200;
    int eval_samples_per_altitude = 150;
    std::uint64_t world_seed_salt = 0x4a83;  // a separate collection of Set A objects
};

struct HeightsResult {
    std::vector<MetricsRecord> records;  // one per arm: baseline, single_h, multi
    // arm name -> altitude -> accuracy
    std::map<std::string, std::map<double, double>> by_altitude;
};

inline HeightsResult exp_heights(const UncertaintyGate& ground_gate, const sim::Scenario& scenario,
                                 std::uint64_t seed, HeightsConfig cfg = {}) {
    HeightsResult result;
    const auto world = sim::build_world(scenario, seed ^ cfg.world_seed_salt);

    auto height_stream = [&](double altitude, int count, std::uint64_t salt) {
        sim::StreamOptions opt;
        opt.sets = {sim::SetId::A};
        opt.count = count;
        opt.aerial = true;
        opt.labeled = true;
        opt.seed = sim::splitmix64(seed ^ salt ^ static_cast<std::uint64_t>(altitude * 1000));
        opt.fixed_altitude = altitude;
        return sim::make_sample_stream(world, opt);
    };

    std::map<double, std::vector<SimFrame>> eval_sets;
    for (double alt : cfg.eval_altitudes)
        eval_sets[alt] = height_stream(alt, cfg.eval_samples_per_altitude, 0xE7A1);

    auto eval_arm = [&](UncertaintyGate& gate, const std::string& name) {
        MetricsRecord rec;
        rec.experiment = "heights";
        rec.phase = name;
        for (auto& [alt, frames] : eval_sets) {
            const double acc = eval_stream(gate, frames, scenario).accuracy_pct();
            result.by_altitude[name][alt] = acc;
            char key[32];
            std::snprintf(key, sizeof(key), "alt_%g", alt);
            rec.accuracy[key] = acc;
        }
        result.records.push_back(std::move(rec));
    };

    {  // baseline: the ground model untouched
        UncertaintyGate gate = ground_gate;
        eval_arm(gate, "baseline");
    }
    for (double h : cfg.single_heights) {
        UncertaintyGate gate = ground_gate;
        train_stream(gate, height_stream(h, cfg.train_samples_per_height, 0x7211),
                     LearnMode::Supervised);
        char name[32];
        std::snprintf(name, sizeof(name), "single_%g", h);
        eval_arm(gate, name);
    }
    {  // continual learning over both heights, sequentially
        UncertaintyGate gate = ground_gate;
        std::int64_t offset = 0;
        for (double h : cfg.single_heights) {
            const auto frames = height_stream(h, cfg.train_samples_per_height, 0x7211);
            train_stream(gate, frames, LearnMode::Supervised, offset);
            offset += static_cast<std::int64_t>(frames.size());
        }
        eval_arm(gate, "multi");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Scripted embodied mission
// ---------------------------------------------------------------------------

struct MissionConfig {
    std::vector<double> climb_altitudes{10.0, 15.0, 20.0, 25.0, 30.0};
    std::vector<double> sweep_azimuths{0.0, 45.0, 90.0};
    int frames_per_step = 24;   // learning limited to 20-30 frames per step
    int acquire_frames = 5;
    int observe_frames = 10;
    int validation_frames = 15;
    double observe_altitude = 30.0;
    double acquire_altitude = 2.0;
    double validation_altitude = 20.0;
    std::optional<double> psi1_override;  // detection stringency knob
    std::optional<double> psi2_override;  // category-fit stringency knob
    std::optional<double> psi3_override;  // similarity stringency knob
};

struct MissionPhaseLog {
    std::string phase;
    int intersection = -1;
    double altitude = 0.0;
    double azimuth = 0.0;
    long detections = 0;
    long correct = 0;
    double accuracy_pct() const {
        return detections == 0
                   ? 0.0
                   : 100.0 * static_cast<double>(correct) / static_cast<double>(detections);
    }
};

struct MissionResult {
    std::vector<MissionPhaseLog> log;
    long objects_validated = 0;
    long objects_correct = 0;
    double validation_accuracy_pct() const {
        return objects_validated == 0 ? 0.0
                                      : 100.0 * static_cast<double>(objects_correct) /
                                            static_cast<double>(objects_validated);
    }
    std::vector<MetricsRecord> records;
};

/// The scripted self-supervised mission: observe poorly from 30 m, acquire
/// identities at 2 m, climb 10->30 m in 5 m steps at three azimuths while
/// learning from spatial-memory labels, repeat at the second intersection,
/// then return to intersection 1 for a 20 m validation pass judged per object
/// through the hypothesis buffers.
inline MissionResult exp_mission(UncertaintyGate& gate, const sim::World& world,
                                 std::uint64_t seed, MissionConfig cfg = {}) {
    MissionResult result;
    const auto& scenario = world.scenario;

    if (cfg.psi1_override) gate.criteria().psi1 = *cfg.psi1_override;
    if (cfg.psi2_override) gate.criteria().psi2 = *cfg.psi2_override;
    if (cfg.psi3_override) gate.criteria().psi3 = *cfg.psi3_override;

    SpatialMemory memory(2.0, 0.95);
    gate.set_spatial_memory(&memory);
    gate.set_use_buffers(true);

    std::int64_t frame_no = 0;
    std::uint64_t view_salt = sim::splitmix64(seed ^ 0x3155);

    auto run_phase = [&](const std::string& phase, int intersection, double altitude,
                         double azimuth, int frames, LearnMode mode, bool acquire) {
        MissionPhaseLog log;
        log.phase = phase;
        log.intersection = intersection;
        log.altitude = altitude;
        log.azimuth = azimuth;
        view_salt = sim::splitmix64(view_salt);
        sim::ViewCondition view;
        view.altitude = altitude;
        view.azimuth = azimuth;
        view.noise_seed = view_salt;
        view.intersection = intersection;
        for (int f = 0; f < frames; ++f) {
            const auto frame = sim::render_frame(world, view, frame_no);
            for (const auto& det : frame.detections) {
                if (acquire) {
                    memory.acquire(det.detection.object_id, det.detection.position, det.truth,
                                   scenario.acquisition.confidence(altitude), frame_no);
                }
                const auto decision = gate.evaluate_detection(det.detection, mode, frame_no);
                ++log.detections;
                std::string predicted = "?";
                if (decision.category > 0)
                    predicted = gate.registry().display_name(decision.category);
                if (predicted == scenario.class_name(det.truth)) ++log.correct;
            }
            gate.end_frame(frame_no);
            ++frame_no;
        }
        result.log.push_back(log);
    };

    const std::vector<int> mission_intersections{0, 1};
    for (int isec : mission_intersections) {
        run_phase("observe", isec, cfg.observe_altitude, 0.0, cfg.observe_frames,
                  LearnMode::Frozen, false);
        run_phase("acquire", isec, cfg.acquire_altitude, 0.0, cfg.acquire_frames,
                  LearnMode::SelfSupervised, true);
        for (double az : cfg.sweep_azimuths)
            for (double alt : cfg.climb_altitudes)
                run_phase("climb", isec, alt, az, cfg.frames_per_step, LearnMode::SelfSupervised,
                          false);
    }

    // Return validation at intersection 1 (index 0), judged per object.
    run_phase("validate", 0, cfg.validation_altitude, 0.0, cfg.validation_frames,
              LearnMode::Frozen, false);
    for (const auto* obj : world.at_intersection(0)) {
        const int h = gate.persistence_finalize(obj->object_id);
        ++result.objects_validated;
        if (h > 0 && gate.registry().display_name(h) == scenario.class_name(obj->class_id))
            ++result.objects_correct;
    }

    MetricsRecord rec;
    rec.experiment = "mission";
    rec.phase = "validation";
    rec.accuracy["intersection1_objects"] = result.validation_accuracy_pct();
    for (const auto& log : result.log)
        if (log.phase == "observe" && log.intersection == 0)
            rec.accuracy["initial_observe_30m"] = log.accuracy_pct();
    rec.label_requests = static_cast<long>(gate.drain_label_requests().size());
    result.records.push_back(std::move(rec));

    gate.set_spatial_memory(nullptr);
    return result;
}

}  // namespace artgate::exp
