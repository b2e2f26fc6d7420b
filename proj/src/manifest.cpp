#include "rfcloak/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include "rfcloak/error.hpp"
#include "rfcloak/nn/io.hpp"

#ifndef RFCLOAK_VERSION
#define RFCLOAK_VERSION "0.0.0"
#endif

namespace rfcloak {

const char* tool_version() { return RFCLOAK_VERSION; }

std::string sha256_hex(const void* data, std::size_t size) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data, size) != 1 || EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("sha256: digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string sha256_hex(const std::string& text) { return sha256_hex(text.data(), text.size()); }

std::string sha256_file(const std::filesystem::path& path) {
    const auto bytes = nn::read_file(path);
    return sha256_hex(bytes.data(), bytes.size());
}

FileRecord describe_file(const std::filesystem::path& path, const std::filesystem::path& base) {
    FileRecord r;
    const auto rel = std::filesystem::relative(path, base);
    const bool inside = !rel.empty() && rel.native().rfind("..", 0) != 0;
    r.path = inside ? rel.generic_string() : path.generic_string();
    r.sha256 = sha256_file(path);
    r.bytes = std::filesystem::file_size(path);
    return r;
}

nlohmann::json RunManifest::to_json() const {
    auto files_json = [](const std::vector<FileRecord>& list) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& f : list) out.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        return out;
    };
    return {{"tool", tool},
            {"version", version},
            {"command", command},
            {"config_sha256", config_sha256},
            {"master_seed", master_seed},
            {"seeds", seeds},
            {"inputs", files_json(inputs)},
            {"files", files_json(files)}};
}

void update_manifest(const std::filesystem::path& dir, const RunManifest& stage) {
    const auto path = dir / "manifest.json";
    nlohmann::json doc = nlohmann::json::object();
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception&) {
            doc = nlohmann::json::object();
        }
        if (!doc.is_object()) doc = nlohmann::json::object();
    }
    doc["tool"] = stage.tool;
    doc["version"] = stage.version;
    doc["stages"][stage.command] = stage.to_json();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace rfcloak
