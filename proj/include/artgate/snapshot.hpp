#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "artgate/artmap.hpp"
#include "artgate/common.hpp"
#include "artgate/uncertainty.hpp"

namespace artgate {

inline constexpr int kModelFormatVersion = 1;

/// The complete learnable state: network parameters and templates, the five
/// uncertainty criteria, and the class registry with its human-label map.
/// Hypothesis buffers are transient and deliberately not part of a snapshot.
struct ModelSnapshot {
    int format_version = kModelFormatVersion;
    std::size_t raw_dim = 0;
    ArtmapParams params;
    UncertaintyCriteria criteria;
    std::vector<CategoryNode> nodes;
    std::vector<ClassRecord> registry;
};

inline void to_json(nlohmann::json& j, const ArtmapParams& p) {
    j = nlohmann::json{{"alpha", p.alpha},
                       {"beta", p.beta},
                       {"epsilon", p.epsilon},
                       {"rho_baseline", p.rho_baseline},
                       {"match_rule", to_string(p.match_rule)}};
}
inline void from_json(const nlohmann::json& j, ArtmapParams& p) {
    j.at("alpha").get_to(p.alpha);
    j.at("beta").get_to(p.beta);
    j.at("epsilon").get_to(p.epsilon);
    j.at("rho_baseline").get_to(p.rho_baseline);
    p.match_rule = match_rule_from_string(j.at("match_rule").get<std::string>());
    p.validate();
}

inline void to_json(nlohmann::json& j, const UncertaintyCriteria& c) {
    j = nlohmann::json{{"psi1", c.psi1},
                       {"psi2", c.psi2},
                       {"psi3", c.psi3},
                       {"psi4", c.psi4},
                       {"psi5", c.psi5},
                       {"buffer_len", c.buffer_len},
                       {"relevance_window", c.relevance_window},
                       {"similarity_fanout", c.similarity_fanout}};
}
inline void from_json(const nlohmann::json& j, UncertaintyCriteria& c) {
    j.at("psi1").get_to(c.psi1);
    j.at("psi2").get_to(c.psi2);
    j.at("psi3").get_to(c.psi3);
    j.at("psi4").get_to(c.psi4);
    j.at("psi5").get_to(c.psi5);
    j.at("buffer_len").get_to(c.buffer_len);
    j.at("relevance_window").get_to(c.relevance_window);
    j.at("similarity_fanout").get_to(c.similarity_fanout);
    c.validate();
}

inline void to_json(nlohmann::json& j, const CategoryNode& n) {
    j = nlohmann::json{{"weights", n.weights},
                       {"label", n.label},
                       {"support", n.support_count},
                       {"created", n.created_frame}};
}
inline void from_json(const nlohmann::json& j, CategoryNode& n) {
    j.at("weights").get_to(n.weights);
    j.at("label").get_to(n.label);
    j.at("support").get_to(n.support_count);
    j.at("created").get_to(n.created_frame);
}

inline void to_json(nlohmann::json& j, const ClassRecord& r) {
    j = nlohmann::json{{"index", r.index},
                       {"origin", to_string(r.origin)},
                       {"support", r.support_count},
                       {"created", r.created_frame},
                       {"active", r.active}};
    if (r.human_label)
        j["human_label"] = *r.human_label;
    else
        j["human_label"] = nullptr;
}
inline void from_json(const nlohmann::json& j, ClassRecord& r) {
    j.at("index").get_to(r.index);
    const auto origin = j.at("origin").get<std::string>();
    if (origin == "supervised")
        r.origin = ClassOrigin::Supervised;
    else if (origin == "self_generated")
        r.origin = ClassOrigin::SelfGenerated;
    else
        throw ConfigError("unknown class origin: " + origin);
    j.at("support").get_to(r.support_count);
    j.at("created").get_to(r.created_frame);
    j.at("active").get_to(r.active);
    if (j.contains("human_label") && !j.at("human_label").is_null())
        r.human_label = j.at("human_label").get<std::string>();
    else
        r.human_label.reset();
}

inline void to_json(nlohmann::json& j, const ModelSnapshot& s) {
    j = nlohmann::json{{"format_version", s.format_version},
                       {"raw_dim", s.raw_dim},
                       {"params", s.params},
                       {"criteria", s.criteria},
                       {"nodes", s.nodes},
                       {"registry", s.registry}};
}
inline void from_json(const nlohmann::json& j, ModelSnapshot& s) {
    if (!j.contains("format_version"))
        throw ConfigError("model file missing format_version");
    j.at("format_version").get_to(s.format_version);
    if (s.format_version != kModelFormatVersion)
        throw ConfigError("unsupported model format version " +
                          std::to_string(s.format_version) + " (expected " +
                          std::to_string(kModelFormatVersion) + ")");
    j.at("raw_dim").get_to(s.raw_dim);
    j.at("params").get_to(s.params);
    j.at("criteria").get_to(s.criteria);
    j.at("nodes").get_to(s.nodes);
    j.at("registry").get_to(s.registry);
}

inline ModelSnapshot snapshot_of(const UncertaintyGate& gate) {
    ModelSnapshot snap;
    snap.raw_dim = gate.network().raw_dim();
    snap.params = gate.network().params();
    snap.criteria = gate.criteria();
    snap.nodes = gate.network().nodes();
    snap.registry = gate.registry().records();
    return snap;
}

inline UncertaintyGate restore_gate(const ModelSnapshot& snap) {
    ArtmapNetwork net(snap.raw_dim, snap.params);
    net.restore_nodes(snap.nodes);
    ClassRegistry registry;
    registry.restore(snap.registry);
    for (const auto& node : net.nodes())
        if (node.label > registry.size())
            throw DomainError("snapshot: node label " + std::to_string(node.label) +
                              " outside registry (n=" + std::to_string(registry.size()) + ")");
    return UncertaintyGate(std::move(net), std::move(registry), snap.criteria);
}

/// Canonical rendering: nlohmann sorts object keys and prints the shortest
/// decimal that round-trips each double, so equal states serialize to equal
/// bytes.
inline std::string canonical_json(const ModelSnapshot& snap) {
    return nlohmann::json(snap).dump(2);
}

inline std::uint64_t state_digest(const UncertaintyGate& gate) {
    Fnv1aDigest digest;
    digest.update(canonical_json(snapshot_of(gate)));
    return digest.value();
}

/// Write-temp-then-rename so a failed save never leaves a readable truncation.
inline void save_model(const UncertaintyGate& gate, const std::string& path) {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write model file: " + tmp);
        out << canonical_json(snapshot_of(gate)) << "\n";
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("failed writing model file: " + tmp);
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("failed renaming model file into place: " + path);
    }
}

/// Load and validate. expected_raw_dim = 0 accepts any dimension; a mismatch
/// throws before any state is constructed for the caller.
inline UncertaintyGate load_model(const std::string& path, std::size_t expected_raw_dim = 0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model file " + path + ": " + e.what());
    }
    ModelSnapshot snap;
    try {
        snap = j.get<ModelSnapshot>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model file " + path + ": " + e.what());
    }
    if (expected_raw_dim != 0 && snap.raw_dim != expected_raw_dim)
        throw DimensionError("model raw_dim " + std::to_string(snap.raw_dim) +
                             " does not match configured " + std::to_string(expected_raw_dim));
    return restore_gate(snap);
}

}  // namespace artgate
