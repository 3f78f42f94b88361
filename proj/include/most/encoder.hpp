#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "most/data.hpp"
#include "most/tensor.hpp"

namespace most {

enum class Aggregator { Mean, Max };
enum class Activation { Gelu, None };

/// Encoder input arrangements: the full two-branch slicing plus the
/// single-branch alternatives used by the ablation harness.
enum class Variant {
    Full,
    M1d,     // mode-1 slices only
    M2d,     // mode-2 slices only
    Random,  // fixed permutation of flattened variables, then full slicing
    Ci,      // every scalar series fed independently
    Cd,      // one flattened (d1*d2, w) matrix
    NoTemporalEmbedding,
    NoCausalEncoder,  // pointwise linear map instead of conv blocks
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& s);
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct MostConfig {
    size_t d1 = 1, d2 = 1;
    size_t h = 64;       // latent dimension; each mode gets h/2
    size_t levels = 7;   // L: blocks k = 0..L with kernel size 2^k
    size_t w_max = 512;  // temporal embedding table width
    Aggregator aggregator = Aggregator::Mean;
    Activation activation = Activation::Gelu;
    Variant variant = Variant::Full;
    uint64_t seed = 1;

    size_t h_half() const { return h / 2; }
    void validate() const;  // throws ConfigError
};

/// All trainable arrays plus the fixed (gradient-free) temporal embedding.
/// Conv blocks are shared between the two mode branches.
struct MostModel {
    MostConfig config;
    std::vector<Param> params;
    std::vector<size_t> kernel_sizes;   // per block
    Tensor temporal_embedding;          // (h, w_max)
    std::vector<size_t> permutation;    // Random variant only, size d1*d2

    int idx_proj1 = -1, idx_proj2 = -1, idx_shared = -1, idx_first_block = -1;

    static MostModel init(const MostConfig& cfg);

    Param& proj_mode1() { return params[static_cast<size_t>(idx_proj1)]; }
    Param& proj_mode2() { return params[static_cast<size_t>(idx_proj2)]; }
    const Param& proj_mode1() const { return params[static_cast<size_t>(idx_proj1)]; }
    const Param& proj_mode2() const { return params[static_cast<size_t>(idx_proj2)]; }

    void zero_grads();
};

/// V = [v_mode1; v_mode2], rows split at h_half.
struct Representation {
    size_t h_half = 0;
    Tensor v;  // (h, w)

    Tensor mode1() const;
    Tensor mode2() const;
};

/// Per-tape parameter placement. Trainable graphs bind Params so backward
/// accumulates into the model; frozen graphs copy values in as constants.
class EncoderGraph {
public:
    static EncoderGraph trainable(Tape& tape, MostModel& model);
    static EncoderGraph frozen(Tape& tape, const MostModel& model);

    /// Returns the (h, w') representation of a window whose column 0 sits at
    /// absolute time crop_offset; the temporal embedding is indexed by
    /// absolute position so both crop views agree on shared timestamps.
    Var encode_window(const TtsWindow& x, size_t crop_offset) const;

    Var embed_slice(Var slice, Var proj, size_t crop_offset) const;
    Var encode_slice(Var h_emb) const;

    const MostModel& model() const { return *model_; }
    Var proj1() const { return proj1_; }
    Var proj2() const { return proj2_; }
    Var proj_shared() const { return proj_shared_; }

private:
    EncoderGraph() = default;
    Tape* tape_ = nullptr;
    const MostModel* model_ = nullptr;
    Var proj1_, proj2_, proj_shared_;
    std::vector<std::pair<Var, Var>> blocks_;  // (kernel, bias)

    Var aggregate(const std::vector<Var>& encodings) const;
    Var branch_mode1(const TtsWindow& x, size_t crop_offset) const;
    Var branch_mode2(const TtsWindow& x, size_t crop_offset) const;
};

Representation forward(const MostModel& model, const TtsWindow& x, size_t crop_offset = 0);
/// Same as forward() but checks the requested variant against the model.
Representation forward_variant(const MostModel& model, const TtsWindow& x, Variant variant,
                               size_t crop_offset = 0);

TtsWindow apply_permutation(const TtsWindow& x, const std::vector<size_t>& perm);

/// Fixed sinusoidal position table, (h, w_max).
Tensor sinusoidal_embedding(size_t h, size_t w_max);

// ---- checkpoints -------------------------------------------------------------
// Versioned container: magic, config JSON, then every parameter with name,
// shape and little-endian f64 payload. Byte-stable for identical state.

void save_checkpoint(const MostModel& model, const std::string& path);
MostModel load_checkpoint(const std::string& path);

/// FNV-1a over all parameter bytes; used to assert probes leave models frozen.
uint64_t params_fingerprint(const MostModel& model);

}  // namespace most
