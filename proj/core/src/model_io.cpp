#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "nlohmann/json.hpp"
#include "scadaguard/errors.hpp"
#include "scadaguard/vae.hpp"

namespace scadaguard {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

namespace {

constexpr char kMagic[4] = {'S', 'G', 'V', 'M'};
constexpr std::uint32_t kVersion = 1;

using json = nlohmann::json;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_block(std::ostream& os, const std::string& name,
                 const std::vector<std::size_t>& shape, const std::vector<double>& data) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) write_u64(os, d);
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
}

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw IoError("cannot open model file: " + p);
    }

    void raw(void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n)) {
            throw IoError("truncated model file: " + path);
        }
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof(v));
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, sizeof(v));
        return v;
    }
    std::string str(std::size_t n) {
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
};

}  // namespace

void save_model(const VaeModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write model file: " + path);

    json header;
    json cfg;
    cfg["channels"] = model.config.channels;
    cfg["window_hours"] = model.config.window_hours;
    cfg["pool_size"] = model.config.pool_size;
    cfg["dense_units"] = model.config.dense_units;
    cfg["latent_dim"] = model.config.latent_dim;
    cfg["seed"] = model.config.seed;
    json convs = json::array();
    for (const auto& cs : model.config.conv_specs) {
        convs.push_back({cs.filter_size, cs.num_filters});
    }
    cfg["conv_specs"] = convs;
    header["config"] = cfg;
    header["channel_names"] = model.channel_names;
    header["norm_mean"] = model.norm_stats.mean;
    header["norm_std"] = model.norm_stats.std;

    const std::string hs = header.dump();
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    std::uint32_t nblocks =
        static_cast<std::uint32_t>(model.params.size() + 2 * model.bn_states.size());
    write_u32(os, nblocks);
    for (const auto& [name, p] : model.params) {
        write_block(os, name, p.value.shape, p.value.data);
    }
    for (const auto& [name, st] : model.bn_states) {
        write_block(os, name + ".running_mean", {st.running_mean.size()}, st.running_mean);
        write_block(os, name + ".running_var", {st.running_var.size()}, st.running_var);
    }
    if (!os) throw IoError("write failure on model file: " + path);
}

VaeModel load_model(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not a model file (bad magic): " + path);
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw IoError("unsupported model file version " + std::to_string(version) + ": " + path);
    }
    const std::uint32_t hlen = r.u32();
    json header;
    try {
        header = json::parse(r.str(hlen));
    } catch (const json::exception& e) {
        throw IoError("corrupt model header in " + path + ": " + e.what());
    }

    VaeConfig cfg;
    const json& jc = header.at("config");
    cfg.channels = jc.at("channels").get<std::size_t>();
    cfg.window_hours = jc.at("window_hours").get<std::size_t>();
    cfg.pool_size = jc.at("pool_size").get<std::size_t>();
    cfg.dense_units = jc.at("dense_units").get<std::vector<std::size_t>>();
    cfg.latent_dim = jc.at("latent_dim").get<std::size_t>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();
    cfg.conv_specs.clear();
    for (const auto& e : jc.at("conv_specs")) {
        cfg.conv_specs.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
    }

    VaeModel model = make_vae_model(cfg);
    model.channel_names = header.at("channel_names").get<std::vector<std::string>>();
    model.norm_stats.mean = header.at("norm_mean").get<std::vector<double>>();
    model.norm_stats.std = header.at("norm_std").get<std::vector<double>>();
    if (model.channel_names.size() != cfg.channels ||
        model.norm_stats.mean.size() != cfg.channels ||
        model.norm_stats.std.size() != cfg.channels) {
        throw IoError("model header channel metadata does not match config: " + path);
    }

    std::set<std::string> expected;
    for (const auto& [name, p] : model.params) expected.insert(name);
    for (const auto& [name, st] : model.bn_states) {
        expected.insert(name + ".running_mean");
        expected.insert(name + ".running_var");
    }

    const std::uint32_t nblocks = r.u32();
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < nblocks; ++i) {
        const std::uint32_t nlen = r.u32();
        const std::string name = r.str(nlen);
        const std::uint32_t ndim = r.u32();
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
        std::vector<double> data(shape_product(shape));
        r.raw(data.data(), data.size() * sizeof(double));

        if (!expected.count(name)) {
            throw IoError("model file contains unknown block '" + name + "': " + path);
        }
        if (seen.count(name)) {
            throw IoError("model file contains duplicate block '" + name + "': " + path);
        }
        seen.insert(name);

        if (name.ends_with(".running_mean") || name.ends_with(".running_var")) {
            const bool is_mean = name.ends_with(".running_mean");
            const std::string layer = name.substr(0, name.rfind('.'));
            auto& st = model.bn_states.at(layer);
            auto& dst = is_mean ? st.running_mean : st.running_var;
            if (shape.size() != 1 || shape[0] != dst.size()) {
                throw IoError("shape mismatch for block '" + name + "' in " + path);
            }
            dst = std::move(data);
        } else {
            Parameter& p = model.param(name);
            if (shape != p.value.shape) {
                throw IoError("shape mismatch for block '" + name + "': expected " +
                              shape_to_string(p.value.shape) + " got " +
                              shape_to_string(shape) + " in " + path);
            }
            p.value.data = std::move(data);
        }
    }
    if (seen.size() != expected.size()) {
        throw IoError("model file is missing " + std::to_string(expected.size() - seen.size()) +
                      " parameter block(s): " + path);
    }
    return model;
}

}  // namespace scadaguard
