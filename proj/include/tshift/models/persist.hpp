#pragma once

// Versioned JSON persistence for model snapshots. The vocabulary is embedded.

#include <fstream>
#include <string>

#include "json.hpp"
#include "tshift/core/error.hpp"
#include "tshift/models/snapshot.hpp"

namespace tshift {

inline constexpr int kSnapshotFormatVersion = 1;

inline nlohmann::json snapshot_to_json(const ModelSnapshot& m) {
    nlohmann::json j;
    j["format"] = "tshift-snapshot";
    j["version"] = kSnapshotFormatVersion;
    j["kind"] = to_string(m.kind());
    j["period"] = m.period();
    j["vocab"] = m.vocab().tokens();
    j["min_frequency"] = m.vocab().min_frequency();
    if (m.kind() == ModelKind::mlp) {
        j["embedding_dim"] = m.shape().embedding;
        j["hidden_dim"] = m.shape().hidden;
    } else {
        j["projection_dim"] = m.projection_dim();
        j["projection_seed"] = m.projection_seed();
    }
    j["parameters"] = std::vector<double>(m.parameters().begin(), m.parameters().end());
    return j;
}

inline ModelSnapshot snapshot_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "tshift-snapshot") throw ParseError(0, "not a snapshot file");
        if (j.at("version").get<int>() != kSnapshotFormatVersion)
            throw ParseError(0, "unsupported snapshot version " + j.at("version").dump());
        const auto kind = parse_model_kind(j.at("kind").get<std::string>());
        auto vocab = std::make_shared<const Vocabulary>(j.at("vocab").get<std::vector<std::string>>(),
                                                        j.value("min_frequency", std::size_t{1}));
        auto theta = j.at("parameters").get<std::vector<double>>();
        const int period = j.at("period").get<int>();
        if (kind == ModelKind::mlp) {
            mlp::Shape shape{vocab->size(), j.at("embedding_dim").get<std::size_t>(),
                             j.at("hidden_dim").get<std::size_t>()};
            return ModelSnapshot::make_mlp(period, std::move(vocab), shape, std::move(theta));
        }
        if (kind == ModelKind::logreg)
            return ModelSnapshot::make_logreg(period, std::move(vocab), std::move(theta),
                                              j.at("projection_dim").get<std::size_t>(),
                                              j.at("projection_seed").get<std::uint64_t>());
        throw ParseError(0, "snapshot kind has no parameters");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, std::string("malformed snapshot: ") + e.what());
    }
}

inline void save_snapshot(const ModelSnapshot& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write snapshot '" + path + "'");
    out << snapshot_to_json(m).dump() << '\n';
}

inline ModelSnapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read snapshot '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(0, std::string("malformed snapshot: ") + e.what());
    }
    return snapshot_from_json(j);
}

}  // namespace tshift
