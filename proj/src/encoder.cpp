#include "most/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "most/errors.hpp"

namespace most {

namespace {

constexpr char kCkptMagic[8] = {'M', 'O', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCkptVersion = 1;

void store_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void store_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t load_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("checkpoint: truncated file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t load_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::M1d: return "m1d";
        case Variant::M2d: return "m2d";
        case Variant::Random: return "random";
        case Variant::Ci: return "ci";
        case Variant::Cd: return "cd";
        case Variant::NoTemporalEmbedding: return "no-temporal-embedding";
        case Variant::NoCausalEncoder: return "no-causal-encoder";
    }
    throw std::invalid_argument("to_string: unknown variant");
}

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::Full;
    if (s == "m1d") return Variant::M1d;
    if (s == "m2d") return Variant::M2d;
    if (s == "random") return Variant::Random;
    if (s == "ci") return Variant::Ci;
    if (s == "cd") return Variant::Cd;
    if (s == "no-temporal-embedding") return Variant::NoTemporalEmbedding;
    if (s == "no-causal-encoder") return Variant::NoCausalEncoder;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

std::string to_string(Aggregator a) { return a == Aggregator::Mean ? "mean" : "max"; }

Aggregator aggregator_from_string(const std::string& s) {
    if (s == "mean") return Aggregator::Mean;
    if (s == "max") return Aggregator::Max;
    throw std::invalid_argument("unknown aggregator '" + s + "'");
}

std::string to_string(Activation a) { return a == Activation::Gelu ? "gelu" : "none"; }

Activation activation_from_string(const std::string& s) {
    if (s == "gelu") return Activation::Gelu;
    if (s == "none") return Activation::None;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

void MostConfig::validate() const {
    if (h < 2 || h % 2 != 0) throw ConfigError("config: h must be even and >= 2");
    if (d1 < 1 || d2 < 1) throw ConfigError("config: d1 and d2 must be >= 1");
    if (w_max < 2) throw ConfigError("config: w_max must be >= 2");
    if (levels > 12) throw ConfigError("config: levels > 12 gives kernels wider than any window");
}

Tensor sinusoidal_embedding(size_t h, size_t w_max) {
    Tensor pe({h, w_max});
    for (size_t r = 0; r < h; ++r) {
        double exponent = static_cast<double>(2 * (r / 2)) / static_cast<double>(h);
        double inv_freq = std::pow(10000.0, -exponent);
        for (size_t t = 0; t < w_max; ++t) {
            double angle = static_cast<double>(t) * inv_freq;
            pe(r, t) = (r % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

MostModel MostModel::init(const MostConfig& cfg) {
    cfg.validate();
    MostModel m;
    m.config = cfg;
    Rng rng(cfg.seed);
    size_t h = cfg.h, hd = cfg.h_half();

    auto add_proj = [&](const std::string& name, size_t d_in) {
        m.params.emplace_back(name, random_normal({h, d_in}, rng, 1.0 / std::sqrt(static_cast<double>(d_in))));
        return static_cast<int>(m.params.size()) - 1;
    };

    switch (cfg.variant) {
        case Variant::Full:
        case Variant::Random:
        case Variant::NoTemporalEmbedding:
        case Variant::NoCausalEncoder:
            m.idx_proj1 = add_proj("proj_mode1", cfg.d1);
            m.idx_proj2 = add_proj("proj_mode2", cfg.d2);
            break;
        case Variant::M1d:
            m.idx_proj1 = add_proj("proj_mode1", cfg.d1);
            break;
        case Variant::M2d:
            m.idx_proj2 = add_proj("proj_mode2", cfg.d2);
            break;
        case Variant::Ci:
            m.idx_shared = add_proj("proj_shared", 1);
            break;
        case Variant::Cd:
            m.idx_shared = add_proj("proj_shared", cfg.d1 * cfg.d2);
            break;
    }

    if (cfg.variant == Variant::NoCausalEncoder) {
        m.kernel_sizes = {1};  // single pointwise block, kept linear
        m.config.activation = Activation::None;
    } else {
        for (size_t k = 0; k <= cfg.levels; ++k) m.kernel_sizes.push_back(size_t{1} << k);
    }
    m.idx_first_block = static_cast<int>(m.params.size());
    for (size_t k = 0; k < m.kernel_sizes.size(); ++k) {
        size_t ks = m.kernel_sizes[k];
        double stdev = 1.0 / std::sqrt(static_cast<double>(h * ks));
        m.params.emplace_back("conv" + std::to_string(k) + ".weight",
                              random_normal({hd, h, ks}, rng, stdev));
        m.params.emplace_back("conv" + std::to_string(k) + ".bias", Tensor({hd}));
    }

    m.temporal_embedding = sinusoidal_embedding(h, cfg.w_max);

    if (cfg.variant == Variant::Random) {
        m.permutation.resize(cfg.d1 * cfg.d2);
        for (size_t i = 0; i < m.permutation.size(); ++i) m.permutation[i] = i;
        Rng perm_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        perm_rng.shuffle(m.permutation);
    }
    return m;
}

void MostModel::zero_grads() {
    for (Param& p : params) p.zero_grad();
}

Tensor Representation::mode1() const {
    size_t w = v.cols();
    Tensor out({h_half, w});
    std::copy(v.data.begin(), v.data.begin() + static_cast<long>(h_half * w), out.data.begin());
    return out;
}

Tensor Representation::mode2() const {
    size_t w = v.cols();
    Tensor out({h_half, w});
    std::copy(v.data.begin() + static_cast<long>(h_half * w),
              v.data.begin() + static_cast<long>(2 * h_half * w), out.data.begin());
    return out;
}

TtsWindow apply_permutation(const TtsWindow& x, const std::vector<size_t>& perm) {
    size_t d1 = x.d1(), d2 = x.d2(), w = x.w();
    if (perm.size() != d1 * d2) {
        throw std::invalid_argument("apply_permutation: permutation size " +
                                    std::to_string(perm.size()) + " vs " +
                                    std::to_string(d1 * d2) + " variables");
    }
    TtsWindow out;
    out.values = Tensor({d1, d2, w});
    out.label = x.label;
    out.sample_id = x.sample_id;
    for (size_t flat = 0; flat < d1 * d2; ++flat) {
        size_t src = perm[flat];
        size_t i = flat / d2, j = flat % d2;
        size_t si = src / d2, sj = src % d2;
        for (size_t t = 0; t < w; ++t) out.values.at3(i, j, t) = x.values.at3(si, sj, t);
    }
    return out;
}

// ---- EncoderGraph ------------------------------------------------------------

EncoderGraph EncoderGraph::trainable(Tape& tape, MostModel& model) {
    EncoderGraph g;
    g.tape_ = &tape;
    g.model_ = &model;
    if (model.idx_proj1 >= 0) g.proj1_ = tape.param(model.params[static_cast<size_t>(model.idx_proj1)]);
    if (model.idx_proj2 >= 0) g.proj2_ = tape.param(model.params[static_cast<size_t>(model.idx_proj2)]);
    if (model.idx_shared >= 0) g.proj_shared_ = tape.param(model.params[static_cast<size_t>(model.idx_shared)]);
    for (size_t k = 0; k < model.kernel_sizes.size(); ++k) {
        size_t base = static_cast<size_t>(model.idx_first_block) + 2 * k;
        g.blocks_.emplace_back(tape.param(model.params[base]), tape.param(model.params[base + 1]));
    }
    return g;
}

EncoderGraph EncoderGraph::frozen(Tape& tape, const MostModel& model) {
    EncoderGraph g;
    g.tape_ = &tape;
    g.model_ = &model;
    if (model.idx_proj1 >= 0) g.proj1_ = tape.input(model.params[static_cast<size_t>(model.idx_proj1)].value);
    if (model.idx_proj2 >= 0) g.proj2_ = tape.input(model.params[static_cast<size_t>(model.idx_proj2)].value);
    if (model.idx_shared >= 0) g.proj_shared_ = tape.input(model.params[static_cast<size_t>(model.idx_shared)].value);
    for (size_t k = 0; k < model.kernel_sizes.size(); ++k) {
        size_t base = static_cast<size_t>(model.idx_first_block) + 2 * k;
        g.blocks_.emplace_back(tape.input(model.params[base].value),
                               tape.input(model.params[base + 1].value));
    }
    return g;
}

Var EncoderGraph::embed_slice(Var slice, Var proj, size_t crop_offset) const {
    const MostConfig& cfg = model_->config;
    size_t w = tape_->value(slice).cols();
    if (crop_offset + w > cfg.w_max) {
        throw ConfigError("embed_slice: window [" + std::to_string(crop_offset) + "," +
                          std::to_string(crop_offset + w) + ") exceeds w_max=" +
                          std::to_string(cfg.w_max));
    }
    Var projected = matmul(proj, slice);
    if (cfg.variant == Variant::NoTemporalEmbedding) return projected;
    Tensor cols({cfg.h, w});
    for (size_t r = 0; r < cfg.h; ++r)
        for (size_t t = 0; t < w; ++t) cols(r, t) = model_->temporal_embedding(r, crop_offset + t);
    return add(projected, tape_->constant(std::move(cols)));
}

Var EncoderGraph::encode_slice(Var h_emb) const {
    std::vector<Var> outs;
    outs.reserve(blocks_.size());
    for (const auto& [kernel, bias] : blocks_) {
        Var y = causal_conv1d(h_emb, kernel, bias);
        if (model_->config.activation == Activation::Gelu) y = gelu(y);
        outs.push_back(y);
    }
    return mean_over(outs);
}

Var EncoderGraph::aggregate(const std::vector<Var>& encodings) const {
    if (encodings.size() == 1) return encodings[0];
    return model_->config.aggregator == Aggregator::Mean ? mean_over(encodings)
                                                         : max_over(encodings);
}

Var EncoderGraph::branch_mode1(const TtsWindow& x, size_t crop_offset) const {
    size_t d1 = x.d1(), d2 = x.d2(), w = x.w();
    std::vector<Var> encs;
    encs.reserve(d2);
    for (size_t j = 0; j < d2; ++j) {
        Tensor s({d1, w});
        for (size_t i = 0; i < d1; ++i)
            for (size_t t = 0; t < w; ++t) s(i, t) = x.values.at3(i, j, t);
        Var slice_in = tape_->input(std::move(s));
        encs.push_back(encode_slice(embed_slice(slice_in, proj1_, crop_offset)));
    }
    return aggregate(encs);
}

Var EncoderGraph::branch_mode2(const TtsWindow& x, size_t crop_offset) const {
    size_t d1 = x.d1(), d2 = x.d2(), w = x.w();
    std::vector<Var> encs;
    encs.reserve(d1);
    for (size_t i = 0; i < d1; ++i) {
        Tensor s({d2, w});
        for (size_t j = 0; j < d2; ++j)
            for (size_t t = 0; t < w; ++t) s(j, t) = x.values.at3(i, j, t);
        Var slice_in = tape_->input(std::move(s));
        encs.push_back(encode_slice(embed_slice(slice_in, proj2_, crop_offset)));
    }
    return aggregate(encs);
}

Var EncoderGraph::encode_window(const TtsWindow& x_in, size_t crop_offset) const {
    const MostConfig& cfg = model_->config;
    if (x_in.d1() != cfg.d1 || x_in.d2() != cfg.d2) {
        throw std::invalid_argument("encode_window: window dims (" + std::to_string(x_in.d1()) +
                                    "," + std::to_string(x_in.d2()) + ") vs model (" +
                                    std::to_string(cfg.d1) + "," + std::to_string(cfg.d2) + ")");
    }
    const TtsWindow* x = &x_in;
    TtsWindow permuted;
    if (cfg.variant == Variant::Random) {
        permuted = apply_permutation(x_in, model_->permutation);
        x = &permuted;
    }

    switch (cfg.variant) {
        case Variant::Full:
        case Variant::Random:
        case Variant::NoTemporalEmbedding:
        case Variant::NoCausalEncoder: {
            Var v1 = branch_mode1(*x, crop_offset);
            Var v2 = branch_mode2(*x, crop_offset);
            return concat_rows({v1, v2});
        }
        case Variant::M1d: {
            Var v = branch_mode1(*x, crop_offset);
            return concat_rows({v, v});
        }
        case Variant::M2d: {
            Var v = branch_mode2(*x, crop_offset);
            return concat_rows({v, v});
        }
        case Variant::Ci: {
            size_t d1 = x->d1(), d2 = x->d2(), w = x->w();
            std::vector<Var> encs;
            encs.reserve(d1 * d2);
            for (size_t i = 0; i < d1; ++i) {
                for (size_t j = 0; j < d2; ++j) {
                    Tensor s({1, w});
                    for (size_t t = 0; t < w; ++t) s(0, t) = x->values.at3(i, j, t);
                    Var slice_in = tape_->input(std::move(s));
                    encs.push_back(encode_slice(embed_slice(slice_in, proj_shared_, crop_offset)));
                }
            }
            Var v = aggregate(encs);
            return concat_rows({v, v});
        }
        case Variant::Cd: {
            size_t d1 = x->d1(), d2 = x->d2(), w = x->w();
            Tensor s({d1 * d2, w});
            for (size_t i = 0; i < d1; ++i)
                for (size_t j = 0; j < d2; ++j)
                    for (size_t t = 0; t < w; ++t) s(i * d2 + j, t) = x->values.at3(i, j, t);
            Var slice_in = tape_->input(std::move(s));
            Var v = encode_slice(embed_slice(slice_in, proj_shared_, crop_offset));
            return concat_rows({v, v});
        }
    }
    throw std::invalid_argument("encode_window: unknown variant");
}

Representation forward(const MostModel& model, const TtsWindow& x, size_t crop_offset) {
    Tape tape;
    EncoderGraph g = EncoderGraph::frozen(tape, model);
    Var v = g.encode_window(x, crop_offset);
    Representation rep;
    rep.h_half = model.config.h_half();
    rep.v = tape.value(v);
    return rep;
}

Representation forward_variant(const MostModel& model, const TtsWindow& x, Variant variant,
                               size_t crop_offset) {
    if (variant != model.config.variant) {
        throw std::invalid_argument("forward_variant: model was built for variant '" +
                                    to_string(model.config.variant) + "', requested '" +
                                    to_string(variant) + "'");
    }
    return forward(model, x, crop_offset);
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const MostConfig& c) {
    nlohmann::json j;
    j["d1"] = c.d1;
    j["d2"] = c.d2;
    j["h"] = c.h;
    j["levels"] = c.levels;
    j["w_max"] = c.w_max;
    j["aggregator"] = to_string(c.aggregator);
    j["activation"] = to_string(c.activation);
    j["variant"] = to_string(c.variant);
    j["seed"] = c.seed;
    return j;
}

MostConfig config_from_json(const nlohmann::json& j) {
    MostConfig c;
    c.d1 = j.at("d1").get<size_t>();
    c.d2 = j.at("d2").get<size_t>();
    c.h = j.at("h").get<size_t>();
    c.levels = j.at("levels").get<size_t>();
    c.w_max = j.at("w_max").get<size_t>();
    c.aggregator = aggregator_from_string(j.at("aggregator").get<std::string>());
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

}  // namespace

void save_checkpoint(const MostModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path);
    os.write(kCkptMagic, 8);
    store_u32(os, kCkptVersion);
    std::string cfg = config_to_json(model.config).dump();
    store_u32(os, static_cast<uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<long>(cfg.size()));
    store_u64(os, model.params.size());
    for (const Param& p : model.params) {
        store_u32(os, static_cast<uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<long>(p.name.size()));
        store_u32(os, static_cast<uint32_t>(p.value.rank()));
        for (size_t d : p.value.shape) store_u64(os, d);
        for (double v : p.value.data) {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            store_u64(os, bits);
        }
    }
    if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

MostModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0) {
        throw IoError("load_checkpoint: bad magic in " + path);
    }
    uint32_t version = load_u32(is);
    if (version != kCkptVersion) {
        throw IoError("load_checkpoint: unsupported version " + std::to_string(version));
    }
    uint32_t cfg_len = load_u32(is);
    std::string cfg(cfg_len, '\0');
    is.read(cfg.data(), cfg_len);
    if (!is) throw IoError("load_checkpoint: truncated config block");
    MostConfig config;
    try {
        config = config_from_json(nlohmann::json::parse(cfg));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("load_checkpoint: corrupt config: ") + e.what());
    }
    MostModel model = MostModel::init(config);
    uint64_t n_params = load_u64(is);
    if (n_params != model.params.size()) {
        throw IoError("load_checkpoint: parameter count " + std::to_string(n_params) +
                      " does not match config (" + std::to_string(model.params.size()) + ")");
    }
    for (Param& p : model.params) {
        uint32_t name_len = load_u32(is);
        if (name_len > 4096) throw IoError("load_checkpoint: corrupt parameter record");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw IoError("load_checkpoint: truncated parameter name");
        if (name != p.name) {
            throw IoError("load_checkpoint: parameter '" + name + "' where '" + p.name +
                          "' was expected");
        }
        uint32_t rank = load_u32(is);
        if (rank > 8) throw IoError("load_checkpoint: corrupt parameter rank");
        std::vector<size_t> shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = load_u64(is);
        if (shape != p.value.shape) {
            throw IoError("load_checkpoint: shape " + shape_str(shape) + " for '" + name +
                          "', expected " + shape_str(p.value.shape));
        }
        for (double& v : p.value.data) {
            uint64_t bits = load_u64(is);
            std::memcpy(&v, &bits, 8);
        }
    }
    return model;
}

uint64_t params_fingerprint(const MostModel& model) {
    uint64_t hash = 1469598103934665603ULL;
    auto mix = [&hash](const void* ptr, size_t len) {
        const unsigned char* b = static_cast<const unsigned char*>(ptr);
        for (size_t k = 0; k < len; ++k) {
            hash ^= b[k];
            hash *= 1099511628211ULL;
        }
    };
    for (const Param& p : model.params) {
        mix(p.name.data(), p.name.size());
        mix(p.value.data.data(), p.value.data.size() * sizeof(double));
    }
    return hash;
}

}  // namespace most
