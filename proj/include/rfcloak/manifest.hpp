#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace rfcloak {

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);

struct FileRecord {
    std::string path;  // relative to the output directory when inside it
    std::string sha256;
    std::uintmax_t bytes = 0;
};

FileRecord describe_file(const std::filesystem::path& path, const std::filesystem::path& base);

// Provenance of one command run. The manifest file in an output directory
// holds one entry per command, so stages run separately accumulate there.
struct RunManifest {
    std::string tool = "rfcloak";
    std::string version;
    std::string command;
    std::string config_sha256;
    std::uint64_t master_seed = 0;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> files;

    nlohmann::json to_json() const;
};

// Writes `stage` into <dir>/manifest.json, keeping entries of other commands.
void update_manifest(const std::filesystem::path& dir, const RunManifest& stage);

const char* tool_version();

}  // namespace rfcloak
