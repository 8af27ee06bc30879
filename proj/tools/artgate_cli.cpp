// artgate command-line runner: data generation, training, evaluation, the
// experiment protocols, and interactive label assignment.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "artgate/experiments.hpp"
#include "artgate/simenv.hpp"
#include "artgate/snapshot.hpp"

namespace fs = std::filesystem;
using namespace artgate;
using nlohmann::json;

namespace {

sim::Scenario resolve_scenario(const std::string& path) {
    if (path.empty()) return sim::default_scenario();
    return sim::load_scenario(path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

std::vector<sim::SimFrame> require_stream(const std::string& path, const char* role) {
    if (path.empty()) throw ConfigError(std::string("missing required stream for ") + role);
    if (!fs::exists(path))
        throw IoError(std::string("missing prerequisite stream (") + role + "): " + path);
    return sim::read_stream(path);
}

UncertaintyGate require_model(const std::string& path, std::size_t raw_dim) {
    if (path.empty()) throw ConfigError("missing required --model");
    if (!fs::exists(path)) throw IoError("missing prerequisite model: " + path);
    return load_model(path, raw_dim);
}

std::vector<double> parse_checkpoints(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const auto comma = csv.find(',', pos);
        const auto token = csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!token.empty()) out.push_back(std::stod(token));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

struct DataPaths {
    std::string dir;
    std::string scenario() const { return dir + "/scenario.json"; }
    std::string ground() const { return dir + "/ground_all.jsonl"; }
    std::string a_train() const { return dir + "/aerial_a_train.jsonl"; }
    std::string a_test() const { return dir + "/aerial_a_test.jsonl"; }
    std::string b_train() const { return dir + "/aerial_b_train.jsonl"; }
    std::string b_test() const { return dir + "/aerial_b_test.jsonl"; }
    std::string c_train() const { return dir + "/aerial_c_train.jsonl"; }
    std::string c_test() const { return dir + "/aerial_c_test.jsonl"; }
};

exp::DataBundle load_bundle(const DataPaths& paths) {
    exp::DataBundle bundle;
    if (!fs::exists(paths.scenario()))
        throw IoError("missing prerequisite scenario: " + paths.scenario());
    bundle.scenario = sim::load_scenario(paths.scenario());
    bundle.world = sim::build_world(bundle.scenario, bundle.scenario.seed);
    bundle.ground_all = require_stream(paths.ground(), "ground_all");
    bundle.aerial_a_train = require_stream(paths.a_train(), "aerial_a_train");
    bundle.aerial_a_test = require_stream(paths.a_test(), "aerial_a_test");
    bundle.aerial_b_train = require_stream(paths.b_train(), "aerial_b_train");
    bundle.aerial_b_test = require_stream(paths.b_test(), "aerial_b_test");
    bundle.aerial_c_train = require_stream(paths.c_train(), "aerial_c_train");
    bundle.aerial_c_test = require_stream(paths.c_test(), "aerial_c_test");
    return bundle;
}

int cmd_gen_data(const std::string& config, std::uint64_t seed, bool seed_set,
                 const std::string& out_dir) {
    auto scenario = resolve_scenario(config);
    if (seed_set) scenario.seed = seed;
    ensure_dir(out_dir);
    const auto bundle = exp::generate_data(scenario, scenario.seed);

    DataPaths paths{out_dir};
    sim::save_scenario(scenario, paths.scenario());
    sim::write_stream(bundle.ground_all, paths.ground());
    sim::write_stream(bundle.aerial_a_train, paths.a_train());
    sim::write_stream(bundle.aerial_a_test, paths.a_test());
    sim::write_stream(bundle.aerial_b_train, paths.b_train());
    sim::write_stream(bundle.aerial_b_test, paths.b_test());
    sim::write_stream(bundle.aerial_c_train, paths.c_train());
    sim::write_stream(bundle.aerial_c_test, paths.c_test());

    std::vector<sim::ViewCondition> views;
    for (double alt : {2.0, 20.0}) {
        sim::ViewCondition v;
        v.altitude = alt;
        v.noise_seed = scenario.seed ^ 0xFEED;
        views.push_back(v);
    }
    sim::export_features(bundle.world, views, out_dir + "/features.csv");

    json manifest{{"seed", scenario.seed},
                  {"scenario", "scenario.json"},
                  {"streams",
                   {{"ground_all", {{"file", "ground_all.jsonl"}, {"frames", bundle.ground_all.size()}}},
                    {"aerial_a_train",
                     {{"file", "aerial_a_train.jsonl"},
                      {"frames", bundle.aerial_a_train.size()},
                      {"split", scenario.splits.aerial_a_train}}},
                    {"aerial_a_test",
                     {{"file", "aerial_a_test.jsonl"}, {"frames", bundle.aerial_a_test.size()}}},
                    {"aerial_b_train",
                     {{"file", "aerial_b_train.jsonl"},
                      {"frames", bundle.aerial_b_train.size()},
                      {"split", scenario.splits.aerial_b_train}}},
                    {"aerial_b_test",
                     {{"file", "aerial_b_test.jsonl"}, {"frames", bundle.aerial_b_test.size()}}},
                    {"aerial_c_train",
                     {{"file", "aerial_c_train.jsonl"},
                      {"frames", bundle.aerial_c_train.size()},
                      {"split", scenario.splits.aerial_c_train}}},
                    {"aerial_c_test",
                     {{"file", "aerial_c_test.jsonl"}, {"frames", bundle.aerial_c_test.size()}}}}}};
    std::ofstream mf(out_dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";

    std::cout << "gen-data: wrote " << out_dir << " (ground " << bundle.ground_all.size()
              << ", aerial A " << bundle.aerial_a_train.size() << "+" << bundle.aerial_a_test.size()
              << ", B " << bundle.aerial_b_train.size() << "+" << bundle.aerial_b_test.size()
              << ", C " << bundle.aerial_c_train.size() << "+" << bundle.aerial_c_test.size()
              << ")\n";
    return 0;
}

int cmd_train(const std::string& scenario_path, const std::string& stream_path,
              const std::string& model_in, const std::string& model_out,
              const std::string& mode_name) {
    const auto scenario = resolve_scenario(scenario_path);
    const auto frames = require_stream(stream_path, "training stream");
    const auto mode = learn_mode_from_string(mode_name);

    UncertaintyGate gate = model_in.empty()
                               ? exp::make_gate(scenario)
                               : require_model(model_in, static_cast<std::size_t>(scenario.raw_dim));
    const auto stats = exp::train_stream(gate, frames, mode);
    save_model(gate, model_out);
    std::cout << "train: " << stats.samples << " samples, " << gate.network().node_count()
              << " nodes, " << stats.new_classes << " new classes, " << stats.match_tracked
              << " match-tracking events -> " << model_out << "\n";
    return 0;
}

int cmd_eval(const std::string& scenario_path, const std::string& stream_path,
             const std::string& model_path, const std::string& out_path) {
    const auto scenario = resolve_scenario(scenario_path);
    const auto frames = require_stream(stream_path, "evaluation stream");
    auto gate = require_model(model_path, static_cast<std::size_t>(scenario.raw_dim));
    const auto result = exp::eval_stream(gate, frames, scenario);
    std::cout << "eval: accuracy " << result.accuracy_pct() << "% (" << result.correct << "/"
              << result.total << ", unknown " << result.unknown << ")\n";
    if (!out_path.empty()) {
        json j{{"accuracy_pct", result.accuracy_pct()},
               {"correct", result.correct},
               {"total", result.total},
               {"unknown", result.unknown},
               {"decision_digest", result.decision_digest}};
        std::ofstream out(out_path);
        if (!out) throw IoError("cannot write " + out_path);
        out << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_curve(const std::string& scenario_path, const std::string& stream_path,
              const std::string& model_path, const std::vector<std::string>& eval_specs,
              const std::string& checkpoints_csv, const std::string& mode_name,
              const std::string& out_path) {
    const auto scenario = resolve_scenario(scenario_path);
    const auto train = require_stream(stream_path, "training stream");
    auto gate = require_model(model_path, static_cast<std::size_t>(scenario.raw_dim));

    std::vector<std::vector<sim::SimFrame>> eval_frames;
    std::vector<std::pair<std::string, const std::vector<sim::SimFrame>*>> testsets;
    eval_frames.reserve(eval_specs.size());
    for (const auto& spec : eval_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--eval expects name=path, got: " + spec);
        eval_frames.push_back(require_stream(spec.substr(eq + 1), "evaluation stream"));
    }
    for (std::size_t i = 0; i < eval_specs.size(); ++i)
        testsets.emplace_back(eval_specs[i].substr(0, eval_specs[i].find('=')), &eval_frames[i]);

    const auto rows = exp::run_curve(gate, train, testsets, scenario,
                                     parse_checkpoints(checkpoints_csv),
                                     learn_mode_from_string(mode_name));
    exp::write_curve_csv(rows, out_path);
    std::cout << "curve: " << rows.size() << " checkpoints -> " << out_path << "\n";
    return 0;
}

int cmd_exp_transfer(const std::string& data_dir, const std::string& model_path,
                     const std::string& out_dir, const std::string& checkpoints_csv) {
    const auto bundle = load_bundle(DataPaths{data_dir});
    auto gate = require_model(model_path, static_cast<std::size_t>(bundle.scenario.raw_dim));
    ensure_dir(out_dir);
    auto checkpoints = checkpoints_csv.empty() ? exp::default_checkpoints()
                                               : parse_checkpoints(checkpoints_csv);
    const auto result = exp::exp_transfer(gate, bundle, checkpoints);
    exp::write_metrics_csv(result.records, out_dir + "/transfer_metrics.csv");
    exp::write_metrics_json(result.records, out_dir + "/transfer_metrics.json");
    exp::write_curve_csv(result.curve, out_dir + "/transfer_curve.csv");
    save_model(gate, out_dir + "/model_after_aerial_a.json");
    std::cout << "exp-transfer: initial aerial "
              << result.records.front().accuracy.at("aerial_a") << "% -> after training "
              << result.records.back().accuracy.at("aerial_a") << "% (ground "
              << result.records.back().accuracy.at("ground") << "%)\n";
    return 0;
}

int cmd_exp_boundary(const std::string& data_dir, const std::string& model_path,
                     const std::string& out_dir, const std::string& checkpoints_csv) {
    const auto bundle = load_bundle(DataPaths{data_dir});
    auto gate = require_model(model_path, static_cast<std::size_t>(bundle.scenario.raw_dim));
    ensure_dir(out_dir);
    auto checkpoints = checkpoints_csv.empty() ? exp::default_checkpoints()
                                               : parse_checkpoints(checkpoints_csv);
    const auto result = exp::exp_boundary(gate, bundle, checkpoints);
    exp::write_metrics_csv(result.records, out_dir + "/boundary_metrics.csv");
    exp::write_metrics_json(result.records, out_dir + "/boundary_metrics.json");
    exp::write_curve_csv(result.curve_a, out_dir + "/boundary_curve_aerial_a.csv");
    exp::write_curve_csv(result.curve_b, out_dir + "/boundary_curve_aerial_b.csv");
    save_model(gate, out_dir + "/model_after_aerial_b.json");
    const auto& last = result.records.back();
    std::cout << "exp-boundary: after B training - ground " << last.accuracy.at("ground")
              << "%, aerial A " << last.accuracy.at("aerial_a") << "%, aerial B "
              << last.accuracy.at("aerial_b") << "%\n";
    return 0;
}

std::map<std::string, std::string> read_label_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label map: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed label map " + path + ": " + e.what());
    }
    std::map<std::string, std::string> out;
    for (const auto& [key, value] : j.items()) out[key] = value.get<std::string>();
    return out;
}

/// Applies a label map to flagged classes. Returns the classes labeled.
std::vector<int> apply_label_map(UncertaintyGate& gate,
                                 const std::map<std::string, std::string>& map) {
    std::vector<int> labeled;
    const auto flagged = gate.registry().flag_label_requests();
    for (int cls : flagged) {
        std::string label;
        if (auto it = map.find(std::to_string(cls)); it != map.end())
            label = it->second;
        else if (auto star = map.find("*"); star != map.end())
            label = star->second;
        if (label.empty()) continue;
        gate.registry().assign_human_label({cls}, label);
        labeled.push_back(cls);
    }
    return labeled;
}

int cmd_exp_oneshot(const std::string& data_dir, const std::string& model_path,
                    const std::string& out_dir, double psi3, const std::string& map_path) {
    const auto bundle = load_bundle(DataPaths{data_dir});
    auto gate = require_model(model_path, static_cast<std::size_t>(bundle.scenario.raw_dim));
    ensure_dir(out_dir);

    auto result = exp::exp_oneshot(gate, bundle, psi3);
    save_model(gate, out_dir + "/model_after_aerial_c.json");

    json flags = json::array();
    for (int cls : result.flagged_classes) {
        const auto& rec = gate.registry().record(cls);
        flags.push_back({{"class_index", cls},
                         {"support_count", rec.support_count},
                         {"exemplar_digest", gate.exemplar_digest(cls)}});
    }
    {
        std::ofstream out(out_dir + "/flagged_classes.json");
        out << flags.dump(2) << "\n";
    }

    if (!map_path.empty()) {
        apply_label_map(gate, read_label_map(map_path));
        // labels are already in place; this re-evaluates all four test sets
        result.records.push_back(exp::apply_labels_and_eval(gate, bundle, {}, ""));
        save_model(gate, out_dir + "/model_labeled.json");
    }

    exp::write_metrics_csv(result.records, out_dir + "/oneshot_metrics.csv");
    exp::write_metrics_json(result.records, out_dir + "/oneshot_metrics.json");
    std::cout << "exp-oneshot: " << result.train_stats.new_classes << " new classes, "
              << result.flagged_classes.size() << " flagged"
              << (map_path.empty() ? "" : ", labels applied") << "\n";
    return 0;
}

int cmd_exp_heights(const std::string& scenario_path, const std::string& model_path,
                    const std::string& out_dir, std::uint64_t seed, bool seed_set) {
    const auto scenario = resolve_scenario(scenario_path);
    auto gate = require_model(model_path, static_cast<std::size_t>(scenario.raw_dim));
    ensure_dir(out_dir);
    const auto result =
        exp::exp_heights(gate, scenario, seed_set ? seed : scenario.seed);
    exp::write_metrics_csv(result.records, out_dir + "/heights_metrics.csv");
    exp::write_metrics_json(result.records, out_dir + "/heights_metrics.json");
    std::cout << "exp-heights: " << result.records.size() << " arms evaluated -> " << out_dir
              << "\n";
    return 0;
}

int cmd_exp_mission(const std::string& scenario_path, const std::string& model_path,
                    const std::string& out_dir, std::uint64_t seed, bool seed_set,
                    std::optional<double> psi1, std::optional<double> psi2,
                    std::optional<double> psi3) {
    const auto scenario = resolve_scenario(scenario_path);
    auto gate = require_model(model_path, static_cast<std::size_t>(scenario.raw_dim));
    ensure_dir(out_dir);
    const auto world = sim::build_world(scenario, scenario.seed);
    exp::MissionConfig cfg;
    cfg.psi1_override = psi1;
    cfg.psi2_override = psi2;
    cfg.psi3_override = psi3;
    const auto result = exp::exp_mission(gate, world, seed_set ? seed : scenario.seed, cfg);

    {
        std::ofstream out(out_dir + "/mission_log.csv");
        out << "phase,intersection,altitude,azimuth,detections,accuracy_pct\n";
        for (const auto& log : result.log)
            out << log.phase << "," << log.intersection << "," << log.altitude << ","
                << log.azimuth << "," << log.detections << "," << log.accuracy_pct() << "\n";
    }
    exp::write_metrics_csv(result.records, out_dir + "/mission_metrics.csv");
    exp::write_metrics_json(result.records, out_dir + "/mission_metrics.json");
    save_model(gate, out_dir + "/model_after_mission.json");
    std::cout << "exp-mission: validation " << result.objects_correct << "/"
              << result.objects_validated << " objects ("
              << result.validation_accuracy_pct() << "%)\n";
    return 0;
}

int cmd_label(const std::string& model_path, const std::string& out_path,
              const std::string& map_path) {
    auto gate = require_model(model_path, 0);
    const auto flagged = gate.registry().flag_label_requests();
    if (flagged.empty()) {
        std::cout << "label: none flagged\n";
        return 0;
    }
    if (!map_path.empty()) {
        const auto labeled = apply_label_map(gate, read_label_map(map_path));
        save_model(gate, out_path.empty() ? model_path : out_path);
        std::cout << "label: applied " << labeled.size() << " of " << flagged.size()
                  << " flagged classes\n";
        return 0;
    }
    long applied = 0;
    for (int cls : flagged) {
        const auto& rec = gate.registry().record(cls);
        std::cout << "class " << cls << " (support " << rec.support_count << ", exemplar "
                  << gate.exemplar_digest(cls) << "): label? [empty to skip] " << std::flush;
        std::string label;
        if (!std::getline(std::cin, label)) break;
        if (label.empty()) continue;
        gate.registry().assign_human_label({cls}, label);
        ++applied;
    }
    save_model(gate, out_path.empty() ? model_path : out_path);
    std::cout << "label: applied " << applied << " labels; "
              << gate.registry().flag_label_requests().size() << " still flagged\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"artgate: uncertainty-gated streaming ARTMAP classifier and experiment harness"};
    app.require_subcommand(1);

    std::string config, scenario_path, stream_path, model_path, model_in, out_path, data_dir;
    std::string mode_name = "supervised";
    std::string checkpoints_csv, map_path;
    std::vector<std::string> eval_specs;
    std::uint64_t seed = 0;
    double psi3 = 0.6;
    double ms_psi1 = -1.0, ms_psi2 = -1.0, ms_psi3 = -1.0;

    auto* gen = app.add_subcommand("gen-data", "Generate deterministic streams and splits");
    gen->add_option("--config", config, "Scenario spec JSON (defaults to the built-in scenario)");
    auto* gen_seed = gen->add_option("--seed", seed, "Override the scenario seed");
    gen->add_option("--out", out_path, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train a model on a stream");
    train->add_option("--scenario", scenario_path, "Scenario JSON for class names/dimension");
    train->add_option("--stream", stream_path, "Training stream (JSONL)")->required();
    train->add_option("--in", model_in, "Existing model to continue training");
    train->add_option("--model", model_path, "Output model path")->required();
    train->add_option("--mode", mode_name, "supervised|self_supervised|unsupervised");

    auto* eval = app.add_subcommand("eval", "Evaluate a model on a stream (frozen)");
    eval->add_option("--scenario", scenario_path, "Scenario JSON");
    eval->add_option("--stream", stream_path, "Evaluation stream")->required();
    eval->add_option("--model", model_path, "Model path")->required();
    eval->add_option("--out", out_path, "Metrics JSON output");

    auto* curve = app.add_subcommand("curve", "Accuracy vs training fraction");
    curve->add_option("--scenario", scenario_path, "Scenario JSON");
    curve->add_option("--stream", stream_path, "Training stream")->required();
    curve->add_option("--model", model_path, "Starting model")->required();
    curve->add_option("--eval", eval_specs, "Test set as name=path (repeatable)")->required();
    curve->add_option("--checkpoints", checkpoints_csv, "Comma-separated percentages")
        ->default_val("10,20,30,40,50,60,70,80,90,100");
    curve->add_option("--mode", mode_name, "Training mode");
    curve->add_option("--out", out_path, "Curve CSV output")->required();

    auto* tr = app.add_subcommand("exp-transfer", "Domain-transfer protocol");
    tr->add_option("--data", data_dir, "gen-data output directory")->required();
    tr->add_option("--model", model_path, "Ground-trained model")->required();
    tr->add_option("--out", out_path, "Output directory")->required();
    tr->add_option("--checkpoints", checkpoints_csv, "Comma-separated percentages");

    auto* bd = app.add_subcommand("exp-boundary", "Class-boundary protocol");
    bd->add_option("--data", data_dir, "gen-data output directory")->required();
    bd->add_option("--model", model_path, "Ground-trained model")->required();
    bd->add_option("--out", out_path, "Output directory")->required();
    bd->add_option("--checkpoints", checkpoints_csv, "Comma-separated percentages");

    auto* os = app.add_subcommand("exp-oneshot", "Self-supervised one-shot protocol");
    os->add_option("--data", data_dir, "gen-data output directory")->required();
    os->add_option("--model", model_path, "Post-boundary model")->required();
    os->add_option("--out", out_path, "Output directory")->required();
    os->add_option("--psi3", psi3, "Reduced similarity criterion during the C pass");
    os->add_option("--map", map_path, "Label map JSON, applied after flagging");

    auto* hs = app.add_subcommand("exp-heights", "Multi-height generalization protocol");
    hs->add_option("--scenario", scenario_path, "Scenario JSON");
    hs->add_option("--model", model_path, "Ground-trained model")->required();
    hs->add_option("--out", out_path, "Output directory")->required();
    auto* hs_seed = hs->add_option("--seed", seed, "Seed for the held-out object collection");

    auto* ms = app.add_subcommand("exp-mission", "Scripted embodied mission");
    ms->add_option("--scenario", scenario_path, "Scenario JSON");
    ms->add_option("--model", model_path, "Ground-trained model")->required();
    ms->add_option("--out", out_path, "Output directory")->required();
    auto* ms_seed = ms->add_option("--seed", seed, "Mission noise seed");
    ms->add_option("--psi1", ms_psi1, "Detection stringency during the mission");
    ms->add_option("--psi2", ms_psi2, "Category-fit stringency during the mission");
    ms->add_option("--psi3", ms_psi3, "Similarity stringency during the mission");

    auto* lb = app.add_subcommand("label", "Assign human labels to flagged classes");
    lb->add_option("--model", model_path, "Model path")->required();
    lb->add_option("--out", out_path, "Output model path (defaults to --model)");
    lb->add_option("--map", map_path, "Non-interactive label map JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config, seed, !gen_seed->empty(), out_path);
        if (train->parsed())
            return cmd_train(scenario_path, stream_path, model_in, model_path, mode_name);
        if (eval->parsed()) return cmd_eval(scenario_path, stream_path, model_path, out_path);
        if (curve->parsed())
            return cmd_curve(scenario_path, stream_path, model_path, eval_specs, checkpoints_csv,
                             mode_name, out_path);
        if (tr->parsed()) return cmd_exp_transfer(data_dir, model_path, out_path, checkpoints_csv);
        if (bd->parsed()) return cmd_exp_boundary(data_dir, model_path, out_path, checkpoints_csv);
        if (os->parsed()) return cmd_exp_oneshot(data_dir, model_path, out_path, psi3, map_path);
        if (hs->parsed())
            return cmd_exp_heights(scenario_path, model_path, out_path, seed, !hs_seed->empty());
        if (ms->parsed()) {
            auto knob = [](double v) {
                return v < 0.0 ? std::nullopt : std::optional<double>(v);
            };
            return cmd_exp_mission(scenario_path, model_path, out_path, seed, !ms_seed->empty(),
                                   knob(ms_psi1), knob(ms_psi2), knob(ms_psi3));
        }
        if (lb->parsed()) return cmd_label(model_path, out_path, map_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
