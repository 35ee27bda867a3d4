#include "checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace hmsr {

namespace {

constexpr char kMagic[8] = {'H', 'M', 'S', 'R', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<uint32_t>(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::istream& is) {
    const uint32_t n = take<uint32_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return s;
}

void put_tensor(std::ostream& os, const Tensor<float>& t) {
    put<int32_t>(os, t.c);
    put<int32_t>(os, t.h);
    put<int32_t>(os, t.w);
    os.write(reinterpret_cast<const char*>(t.v.data()),
             static_cast<std::streamsize>(t.v.size() * sizeof(float)));
}

Tensor<float> take_tensor(std::istream& is) {
    const int32_t c = take<int32_t>(is);
    const int32_t h = take<int32_t>(is);
    const int32_t w = take<int32_t>(is);
    if (c < 0 || h < 0 || w < 0) throw std::runtime_error("checkpoint: corrupt tensor header");
    Tensor<float> t(c, h, w);
    is.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const ExperimentConfig& cfg, SrModel<float>& model,
                     const Adam<float>* opt, const TrainState& state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kMagic, sizeof(kMagic));
    put<uint32_t>(os, kFormatVersion);
    put_string(os, config_to_json(cfg).dump());
    put<int64_t>(os, state.iteration);
    put<double>(os, state.best_psnr);
    state.rng.save(os);

    auto params = model.params();
    put<uint32_t>(os, static_cast<uint32_t>(params.size()));
    for (const auto* p : params) {
        put_string(os, p->name);
        put_tensor(os, p->value);
    }
    put<uint8_t>(os, opt ? 1 : 0);
    if (opt) {
        put<int64_t>(os, opt->steps());
        for (size_t i = 0; i < params.size(); ++i) {
            put_tensor(os, opt->m()[i]);
            put_tensor(os, opt->v()[i]);
        }
    }
    if (!os) throw std::runtime_error("write failure on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const uint32_t version = take<uint32_t>(is);
    if (version != kFormatVersion)
        throw std::runtime_error("checkpoint format version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kFormatVersion) + ")");

    LoadedCheckpoint out;
    const std::string cfg_json = take_string(is);
    out.cfg = config_from_json(nlohmann::json::parse(cfg_json));
    out.state.iteration = take<int64_t>(is);
    out.state.best_psnr = take<double>(is);
    out.state.rng.load(is);

    out.model = std::make_unique<SrModel<float>>(out.cfg);
    auto params = out.model->params();
    const uint32_t count = take<uint32_t>(is);
    if (count != params.size())
        throw std::runtime_error("checkpoint parameter count mismatch: file has " +
                                 std::to_string(count) + ", model expects " +
                                 std::to_string(params.size()));
    for (auto* p : params) {
        const std::string name = take_string(is);
        if (name != p->name)
            throw std::runtime_error("checkpoint parameter order mismatch: got '" + name +
                                     "', expected '" + p->name + "'");
        Tensor<float> t = take_tensor(is);
        if (!t.same_shape(p->value))
            throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
        p->value = std::move(t);
    }
    const uint8_t has_opt = take<uint8_t>(is);
    if (has_opt) {
        out.opt = std::make_unique<Adam<float>>(params);
        out.opt->set_steps(take<int64_t>(is));
        for (size_t i = 0; i < params.size(); ++i) {
            out.opt->m()[i] = take_tensor(is);
            out.opt->v()[i] = take_tensor(is);
        }
    }
    return out;
}

std::string file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open file for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!is) break;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace hmsr
