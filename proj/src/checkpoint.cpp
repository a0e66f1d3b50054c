#include "rspt/io/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace rspt {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'P', 'T', 'C', 'K', 'P', '1'};

struct RawCheckpoint {
    CheckpointKind kind;
    uint64_t seed;
    std::vector<int64_t> header;
    Vec params;
};

void write_raw(const std::string& path, const RawCheckpoint& raw) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const auto kind = static_cast<uint32_t>(raw.kind);
    out.write(reinterpret_cast<const char*>(&kind), sizeof(kind));
    out.write(reinterpret_cast<const char*>(&raw.seed), sizeof(raw.seed));
    const auto n_header = static_cast<uint32_t>(raw.header.size());
    out.write(reinterpret_cast<const char*>(&n_header), sizeof(n_header));
    out.write(reinterpret_cast<const char*>(raw.header.data()),
              static_cast<std::streamsize>(raw.header.size() * sizeof(int64_t)));
    const auto n_params = static_cast<uint64_t>(raw.params.size());
    out.write(reinterpret_cast<const char*>(&n_params), sizeof(n_params));
    out.write(reinterpret_cast<const char*>(raw.params.data()),
              static_cast<std::streamsize>(raw.params.size() * sizeof(Scalar)));
    if (!out) throw CheckpointError("short write to " + path);
}

RawCheckpoint read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError(path + ": not an RSPT checkpoint (bad magic)");
    RawCheckpoint raw;
    uint32_t kind = 0, n_header = 0;
    uint64_t n_params = 0;
    in.read(reinterpret_cast<char*>(&kind), sizeof(kind));
    in.read(reinterpret_cast<char*>(&raw.seed), sizeof(raw.seed));
    in.read(reinterpret_cast<char*>(&n_header), sizeof(n_header));
    if (!in || n_header > 64) throw CheckpointError(path + ": corrupt header");
    raw.kind = static_cast<CheckpointKind>(kind);
    raw.header.resize(n_header);
    in.read(reinterpret_cast<char*>(raw.header.data()),
            static_cast<std::streamsize>(n_header * sizeof(int64_t)));
    in.read(reinterpret_cast<char*>(&n_params), sizeof(n_params));
    if (!in) throw CheckpointError(path + ": corrupt header");
    raw.params.resize(static_cast<Eigen::Index>(n_params));
    in.read(reinterpret_cast<char*>(raw.params.data()),
            static_cast<std::streamsize>(n_params * sizeof(Scalar)));
    if (!in) throw CheckpointError(path + ": truncated parameter array");
    return raw;
}

std::vector<int64_t> predictor_header(const PredictorConfig& c) {
    return {c.history, c.horizon,        c.mixtures,       c.map_embed,
            c.traj_embed, c.decoder_hidden, c.use_grid ? 1 : 0};
}

const char* kPredictorFields[] = {"history", "horizon", "mixtures", "map_embed",
                                  "traj_embed", "decoder_hidden", "use_grid"};

std::vector<int64_t> policy_header(const PolicyConfig& c) {
    return {c.use_map ? 1 : 0, c.use_traj ? 1 : 0, c.map_embed, c.traj_embed,
            c.hidden,          c.horizon,          c.mixtures};
}

const char* kPolicyFields[] = {"use_map", "use_traj", "map_embed", "traj_embed",
                               "hidden",  "horizon",  "mixtures"};

void check_header(const std::string& path, const std::vector<int64_t>& found,
                  const std::vector<int64_t>& expected, const char* const* names) {
    if (found == expected) return;
    std::ostringstream msg;
    msg << path << ": checkpoint header mismatch:";
    for (size_t i = 0; i < std::max(found.size(), expected.size()); ++i) {
        const std::string name = i < expected.size() ? names[i] : "extra";
        const std::string f = i < found.size() ? std::to_string(found[i]) : "-";
        const std::string e = i < expected.size() ? std::to_string(expected[i]) : "-";
        if (f != e) msg << " " << name << "=" << f << " (expected " << e << ")";
    }
    throw CheckpointError(msg.str());
}

void check_kind(const std::string& path, CheckpointKind found, CheckpointKind expected) {
    if (found != expected)
        throw CheckpointError(path + ": wrong checkpoint kind " +
                              std::to_string(static_cast<uint32_t>(found)) + " (expected " +
                              std::to_string(static_cast<uint32_t>(expected)) + ")");
}

}  // namespace

void save_predictor(const std::string& path, const PredictorParams& params) {
    write_raw(path, {CheckpointKind::predictor, params.config.seed,
                     predictor_header(params.config), params.store.values});
}

void save_policy(const std::string& path, const PolicyParams& params) {
    write_raw(path, {CheckpointKind::policy, params.config.seed,
                     policy_header(params.config), params.store.values});
}

void save_target_policy(const std::string& path, const TargetPolicyParams& params) {
    write_raw(path, {CheckpointKind::target_policy, params.config.seed,
                     {params.config.hidden}, params.store.values});
}

PredictorParams load_predictor(const std::string& path) {
    const RawCheckpoint raw = read_raw(path);
    check_kind(path, raw.kind, CheckpointKind::predictor);
    if (raw.header.size() != 7) throw CheckpointError(path + ": bad predictor header size");
    PredictorConfig cfg;
    cfg.history = static_cast<int>(raw.header[0]);
    cfg.horizon = static_cast<int>(raw.header[1]);
    cfg.mixtures = static_cast<int>(raw.header[2]);
    cfg.map_embed = static_cast<int>(raw.header[3]);
    cfg.traj_embed = static_cast<int>(raw.header[4]);
    cfg.decoder_hidden = static_cast<int>(raw.header[5]);
    cfg.use_grid = raw.header[6] != 0;
    cfg.seed = raw.seed;
    PredictorParams params = PredictorParams::init(cfg);
    if (params.store.layout.total != raw.params.size())
        throw CheckpointError(path + ": parameter count mismatch");
    params.store.values = raw.params;
    return params;
}

PredictorParams load_predictor(const std::string& path, const PredictorConfig& expected) {
    const RawCheckpoint raw = read_raw(path);
    check_kind(path, raw.kind, CheckpointKind::predictor);
    check_header(path, raw.header, predictor_header(expected), kPredictorFields);
    PredictorConfig cfg = expected;
    cfg.seed = raw.seed;
    PredictorParams params = PredictorParams::init(cfg);
    if (params.store.layout.total != raw.params.size())
        throw CheckpointError(path + ": parameter count mismatch");
    params.store.values = raw.params;
    return params;
}

PolicyParams load_policy(const std::string& path) {
    const RawCheckpoint raw = read_raw(path);
    check_kind(path, raw.kind, CheckpointKind::policy);
    if (raw.header.size() != 7) throw CheckpointError(path + ": bad policy header size");
    PolicyConfig cfg;
    cfg.use_map = raw.header[0] != 0;
    cfg.use_traj = raw.header[1] != 0;
    cfg.map_embed = static_cast<int>(raw.header[2]);
    cfg.traj_embed = static_cast<int>(raw.header[3]);
    cfg.hidden = static_cast<int>(raw.header[4]);
    cfg.horizon = static_cast<int>(raw.header[5]);
    cfg.mixtures = static_cast<int>(raw.header[6]);
    cfg.seed = raw.seed;
    PolicyParams params = PolicyParams::init(cfg);
    if (params.store.layout.total != raw.params.size())
        throw CheckpointError(path + ": parameter count mismatch");
    params.store.values = raw.params;
    return params;
}

PolicyParams load_policy(const std::string& path, const PolicyConfig& expected) {
    const RawCheckpoint raw = read_raw(path);
    check_kind(path, raw.kind, CheckpointKind::policy);
    check_header(path, raw.header, policy_header(expected), kPolicyFields);
    PolicyConfig cfg = expected;
    cfg.seed = raw.seed;
    PolicyParams params = PolicyParams::init(cfg);
    if (params.store.layout.total != raw.params.size())
        throw CheckpointError(path + ": parameter count mismatch");
    params.store.values = raw.params;
    return params;
}

TargetPolicyParams load_target_policy(const std::string& path) {
    const RawCheckpoint raw = read_raw(path);
    check_kind(path, raw.kind, CheckpointKind::target_policy);
    if (raw.header.size() != 1) throw CheckpointError(path + ": bad target header size");
    TargetNetConfig cfg;
    cfg.hidden = static_cast<int>(raw.header[0]);
    cfg.seed = raw.seed;
    TargetPolicyParams params = TargetPolicyParams::init(cfg);
    if (params.store.layout.total != raw.params.size())
        throw CheckpointError(path + ": parameter count mismatch");
    params.store.values = raw.params;
    return params;
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
    const RawCheckpoint raw = read_raw(path);
    CheckpointInfo info;
    info.kind = raw.kind;
    info.seed = raw.seed;
    info.header = raw.header;
    info.param_count = static_cast<size_t>(raw.params.size());
    if (raw.params.size() > 0) {
        info.param_min = raw.params.minCoeff();
        info.param_max = raw.params.maxCoeff();
        info.param_norm = raw.params.norm();
    }
    return info;
}

std::string describe(const CheckpointInfo& info) {
    std::ostringstream out;
    const char* kind = "?";
    const char* const* names = nullptr;
    switch (info.kind) {
        case CheckpointKind::predictor:
            kind = "predictor";
            names = kPredictorFields;
            break;
        case CheckpointKind::policy:
            kind = "policy";
            names = kPolicyFields;
            break;
        case CheckpointKind::target_policy:
            kind = "target_policy";
            break;
    }
    out << "kind: " << kind << "\nseed: " << info.seed << "\nheader:";
    for (size_t i = 0; i < info.header.size(); ++i) {
        out << " ";
        if (names) out << names[i] << "=";
        out << info.header[i];
    }
    out << "\nparams: " << info.param_count << " (min " << info.param_min << ", max "
        << info.param_max << ", l2 " << info.param_norm << ")\n";
    return out.str();
}

}  // namespace rspt
