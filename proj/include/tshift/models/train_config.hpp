#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "tshift/core/error.hpp"

namespace tshift {

enum class ModelKind { logreg, mlp, remote_llm };
enum class StrategyKind { odnm, ndnm, ndom };
enum class OptimizerKind { sgd, adam };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::logreg: return "logreg";
        case ModelKind::mlp: return "mlp";
        case ModelKind::remote_llm: return "remote-llm";
    }
    return "?";
}

inline std::string to_string(StrategyKind s) {
    switch (s) {
        case StrategyKind::odnm: return "ODNM";
        case StrategyKind::ndnm: return "NDNM";
        case StrategyKind::ndom: return "NDOM";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "logreg") return ModelKind::logreg;
    if (s == "mlp") return ModelKind::mlp;
    if (s == "remote-llm" || s == "remote_llm") return ModelKind::remote_llm;
    throw ValidationError("model", "unknown model kind '" + std::string(s) + "'");
}

inline StrategyKind parse_strategy(std::string_view s) {
    std::string lower(s);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "odnm") return StrategyKind::odnm;
    if (lower == "ndnm") return StrategyKind::ndnm;
    if (lower == "ndom") return StrategyKind::ndom;
    throw ValidationError("strategies", "unknown strategy '" + std::string(s) + "'");
}

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double l2_penalty = 1e-4;
    std::size_t hidden_dim = 64;     // mlp representation width
    std::size_t embedding_dim = 32;  // mlp
    std::size_t projection_dim = 64; // logreg representation width
    std::size_t min_frequency = 5;
    OptimizerKind optimizer = OptimizerKind::sgd;
    std::uint64_t seed = 0;

    static TrainConfig defaults_for(ModelKind kind) {
        TrainConfig c;
        if (kind == ModelKind::mlp) c.learning_rate = 1.0;
        return c;
    }

    void validate() const {
        if (!(learning_rate > 0)) throw ValidationError("train.learning_rate", "must be > 0");
        if (epochs < 1) throw ValidationError("train.epochs", "must be >= 1");
        if (batch_size < 1) throw ValidationError("train.batch_size", "must be >= 1");
        if (!(l2_penalty >= 0)) throw ValidationError("train.l2_penalty", "must be >= 0");
        if (hidden_dim < 1) throw ValidationError("train.hidden_dim", "must be >= 1");
        if (embedding_dim < 1) throw ValidationError("train.embedding_dim", "must be >= 1");
        if (projection_dim < 1) throw ValidationError("train.projection_dim", "must be >= 1");
        if (min_frequency < 1) throw ValidationError("train.min_frequency", "must be >= 1");
    }
};

}  // namespace tshift
