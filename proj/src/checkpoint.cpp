#include "dng/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dng/error.hpp"

namespace dng {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are little-endian");

namespace {

constexpr std::array<char, 8> kMagic{'D', 'N', 'G', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw SchemaMismatch("checkpoint truncated");
    return v;
}

}  // namespace

const torch::Tensor& Checkpoint::get(std::string_view name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw SchemaMismatch("checkpoint has no tensor '" + std::string(name) + "'");
}

bool Checkpoint::has(std::string_view name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return true;
    }
    return false;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string json_hash(const json& value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(value.dump())));
    return buf;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    json header;
    header["kind"] = ckpt.kind;
    header["config"] = ckpt.config;
    header["descriptor"] = ckpt.descriptor;
    header["config_hash"] = json_hash(ckpt.config);
    header["descriptor_hash"] = json_hash(ckpt.descriptor);
    json entries = json::array();
    std::uint64_t offset = 0;
    std::vector<torch::Tensor> payloads;
    for (const auto& [name, t] : ckpt.tensors) {
        auto c = t.detach().to(torch::kFloat32).contiguous();
        entries.push_back({{"name", name}, {"shape", c.sizes().vec()}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(c.numel()) * sizeof(float);
        payloads.push_back(c);
    }
    header["tensors"] = entries;
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write checkpoint " + path.string());
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : payloads) {
        os.write(reinterpret_cast<const char*>(p.data_ptr<float>()), static_cast<std::streamsize>(p.numel() * sizeof(float)));
    }
    if (!os) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw SchemaMismatch(path.string() + " is not a checkpoint");
    const auto version = take<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw SchemaMismatch("checkpoint version " + std::to_string(version) + " unsupported");
    }
    const auto len = take<std::uint32_t>(is);
    std::string text(len, '\0');
    is.read(text.data(), len);
    if (!is) throw SchemaMismatch("checkpoint header truncated");
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("checkpoint header: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.config = header.at("config");
    ckpt.descriptor = header.at("descriptor");
    const auto data_start = is.tellg();
    for (const auto& e : header.at("tensors")) {
        const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
        auto t = torch::empty(shape, torch::kFloat32);
        is.seekg(data_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
        is.read(reinterpret_cast<char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!is) throw SchemaMismatch("checkpoint payload truncated at " + e.at("name").get<std::string>());
        ckpt.tensors.emplace_back(e.at("name").get<std::string>(), t);
    }
    return ckpt;
}

void require_same_descriptor(const json& stored, const json& expected) {
    for (const auto& [key, value] : expected.items()) {
        if (!stored.contains(key) || stored.at(key) != value) {
            throw SchemaMismatch("descriptor config mismatch on '" + key + "': checkpoint has " +
                                 (stored.contains(key) ? stored.at(key).dump() : "nothing") + ", expected " +
                                 value.dump());
        }
    }
    for (const auto& [key, value] : stored.items()) {
        if (!expected.contains(key)) throw SchemaMismatch("descriptor config mismatch: unexpected '" + key + "'");
    }
}

void add_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module) {
    for (const auto& p : module.named_parameters(true)) ckpt.add(prefix + "." + p.key(), p.value());
    for (const auto& b : module.named_buffers(true)) ckpt.add(prefix + "." + b.key(), b.value());
}

void load_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module) {
    torch::NoGradGuard guard;
    auto copy = [&](const std::string& name, torch::Tensor& dst) {
        const auto& src = ckpt.get(prefix + "." + name);
        if (src.sizes() != dst.sizes()) {
            std::ostringstream msg;
            msg << "checkpoint tensor " << prefix << "." << name << " has shape " << src.sizes() << ", model expects "
                << dst.sizes();
            throw SchemaMismatch(msg.str());
        }
        dst.copy_(src);
    };
    for (auto& p : module.named_parameters(true)) copy(p.key(), p.value());
    for (auto& b : module.named_buffers(true)) copy(b.key(), b.value());
}

}  // namespace dng
