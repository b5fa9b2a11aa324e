#include "ludor/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ludor/binio.hpp"
#include "ludor/error.hpp"

namespace ludor {

const MlpParams& Checkpoint::get(const std::string& name) const {
    for (const auto& [n, p] : nets) {
        if (n == name) {
            return p;
        }
    }
    throw ConfigError("checkpoint has no network named '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    std::ostringstream head;
    head << "LUDOR-CKPT 1\n"
         << "seed " << ckpt.seed << "\n"
         << "step " << ckpt.step << "\n"
         << "nets " << ckpt.nets.size() << "\n";
    for (const auto& [name, p] : ckpt.nets) {
        const auto arch = arch_of(p);
        head << "net " << name << " dims";
        for (auto d : arch.sizes) {
            head << ' ' << d;
        }
        head << " acts";
        for (const auto& l : p.layers) {
            head << ' ' << to_string(l.activation);
        }
        char scale[64];
        std::snprintf(scale, sizeof scale, "%.17g", p.output_scale);
        head << " scale " << scale << " count " << p.param_count() << "\n";
    }
    head << "data\n";
    std::string out = head.str();
    for (const auto& [name, p] : ckpt.nets) {
        const Vec flat = p.flatten();
        for (Eigen::Index i = 0; i < flat.size(); ++i) {
            binio::put_f64(out, flat(i));
        }
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    std::size_t pos = 0;
    auto next_line = [&]() {
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string::npos) {
            throw ConfigError("truncated checkpoint header");
        }
        std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };
    if (next_line() != "LUDOR-CKPT 1") {
        throw ConfigError("not a checkpoint file (bad magic)");
    }
    Checkpoint ck;
    std::string key;
    std::size_t n_nets = 0;
    {
        std::istringstream s(next_line());
        s >> key >> ck.seed;
        if (key != "seed" || s.fail()) throw ConfigError("checkpoint: malformed seed line");
    }
    {
        std::istringstream s(next_line());
        s >> key >> ck.step;
        if (key != "step" || s.fail()) throw ConfigError("checkpoint: malformed step line");
    }
    {
        std::istringstream s(next_line());
        s >> key >> n_nets;
        if (key != "nets" || s.fail()) throw ConfigError("checkpoint: malformed nets line");
    }
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < n_nets; ++i) {
        std::istringstream s(next_line());
        std::string name;
        std::string tok;
        s >> key >> name >> tok;
        if (key != "net" || tok != "dims") throw ConfigError("checkpoint: malformed net line");
        MlpArch arch;
        std::vector<Activation> acts;
        while (s >> tok && tok != "acts") {
            arch.sizes.push_back(std::stoul(tok));
        }
        while (s >> tok && tok != "scale") {
            acts.push_back(activation_from_string(tok));
        }
        std::size_t count = 0;
        s >> arch.output_scale >> tok >> count;
        if (tok != "count" || s.fail() || arch.sizes.size() != acts.size() + 1) {
            throw ConfigError("checkpoint: malformed net line for '" + name + "'");
        }
        Rng dummy(0);
        MlpParams p = make_mlp(arch, dummy);
        for (std::size_t l = 0; l < acts.size(); ++l) {
            p.layers[l].activation = acts[l];
        }
        if (p.param_count() != count) {
            throw ConfigError("checkpoint: parameter count mismatch for '" + name + "'");
        }
        ck.nets.emplace_back(name, std::move(p));
        counts.push_back(count);
    }
    if (next_line() != "data") {
        throw ConfigError("checkpoint: missing data marker");
    }
    for (std::size_t i = 0; i < n_nets; ++i) {
        if (bytes.size() < pos + counts[i] * 8) {
            throw ConfigError("checkpoint: truncated parameter block");
        }
        Vec flat(static_cast<Eigen::Index>(counts[i]));
        for (std::size_t j = 0; j < counts[i]; ++j) {
            flat(static_cast<Eigen::Index>(j)) = binio::get_f64(bytes.data() + pos);
            pos += 8;
        }
        ck.nets[i].second.assign_flat(flat);
    }
    if (pos != bytes.size()) {
        throw ConfigError("checkpoint: trailing bytes after parameter block");
    }
    return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("cannot open '" + path.string() + "' for writing");
    }
    const std::string bytes = encode_checkpoint(ckpt);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("cannot open checkpoint '" + path.string() + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace ludor
