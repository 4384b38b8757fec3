#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqplan {

/// Transformer architecture and training hyperparameters.
/// All sizes are counts; global_batch_tokens is the step batch in tokens.
struct ModelConfig {
    std::int64_t hidden_dim = 0;           // H
    std::int64_t layers = 0;               // L
    std::int64_t heads = 0;                // D
    std::int64_t vocab = 0;                // V
    std::int64_t seq_len = 0;              // S, tokens
    std::int64_t global_batch_tokens = 0;  // B, tokens
    std::int64_t bytes_per_element = 2;    // 16-bit training by default

    std::vector<std::string> validation_errors() const {
        std::vector<std::string> errs;
        auto positive = [&](std::int64_t v, const char* name) {
            if (v <= 0) errs.push_back(std::string(name) + " must be strictly positive");
        };
        positive(hidden_dim, "hidden_dim");
        positive(layers, "layers");
        positive(heads, "heads");
        positive(vocab, "vocab");
        positive(seq_len, "seq_len");
        positive(global_batch_tokens, "global_batch_tokens");
        positive(bytes_per_element, "bytes_per_element");
        if (hidden_dim > 0 && heads > 0 && hidden_dim % heads != 0)
            errs.push_back("hidden_dim must be divisible by heads");
        return errs;
    }

    bool valid() const { return validation_errors().empty(); }

    void ensure_valid() const {
        auto errs = validation_errors();
        if (!errs.empty()) {
            std::string msg = "invalid model config:";
            for (const auto& e : errs) msg += " " + e + ";";
            throw std::invalid_argument(msg);
        }
    }
};

/// Unsharded per-replica memory footprint in bytes.
struct Footprint {
    std::int64_t params_bytes = 0;
    std::int64_t grads_bytes = 0;
    std::int64_t optstate_bytes = 0;
    std::int64_t act_bytes = 0;
};

/// Parameter count of one transformer layer: attention QKV (3H^2) and output
/// projection (H^2), MLP at ratio 4 (8H^2), two norms (2H).
inline std::int64_t layer_param_count(const ModelConfig& cfg) {
    const std::int64_t h = cfg.hidden_dim;
    return 12 * h * h + 2 * h;
}

/// Full model parameter count: transformer layers plus embedding and head.
inline std::int64_t total_param_count(const ModelConfig& cfg) {
    return layer_param_count(cfg) * cfg.layers + 2 * cfg.vocab * cfg.hidden_dim;
}

/// Unsharded footprint for a given micro-batch size (in sequences).
///
/// The byte coefficients follow mixed-precision Adam accounting: parameters
/// and gradients at bytes_per_element each, optimizer states at 3x that
/// (master copy plus two moments). Changing bytes_per_element scales P/G/ACT
/// linearly and OS by 3x the same scale. Activations are
/// e * b * S * (17HL + H + V) per replica.
inline Footprint unsharded_footprint(const ModelConfig& cfg, std::int64_t micro_batch) {
    cfg.ensure_valid();
    if (micro_batch < 1) throw std::invalid_argument("micro_batch must be >= 1");
    const std::int64_t e = cfg.bytes_per_element;
    const std::int64_t total = total_param_count(cfg);
    Footprint f;
    f.params_bytes = e * total;
    f.grads_bytes = e * total;
    f.optstate_bytes = 3 * e * total;
    f.act_bytes = e * micro_batch * cfg.seq_len *
                  (17 * cfg.hidden_dim * cfg.layers + cfg.hidden_dim + cfg.vocab);
    return f;
}

/// Named presets used throughout the fixtures. seq_len and batch default to
/// 4k / 4M tokens and are meant to be overridden per experiment.
inline ModelConfig model_preset(const std::string& name) {
    ModelConfig cfg;
    cfg.vocab = 100000;
    cfg.seq_len = 4096;
    cfg.global_batch_tokens = 4 * 1024 * 1024;
    if (name == "7b" || name == "7B") {
        cfg.hidden_dim = 4096; cfg.layers = 32; cfg.heads = 32;
    } else if (name == "13b" || name == "13B") {
        cfg.hidden_dim = 5120; cfg.layers = 40; cfg.heads = 40;
    } else if (name == "30b" || name == "30B") {
        cfg.hidden_dim = 6144; cfg.layers = 60; cfg.heads = 48;
    } else if (name == "65b" || name == "65B") {
        cfg.hidden_dim = 8192; cfg.layers = 80; cfg.heads = 64;
    } else {
        throw std::invalid_argument("unknown model preset: " + name);
    }
    return cfg;
}

}  // namespace seqplan
