#pragma once

// Binary containers for datasets and checkpoints:
//
//   magic[4]  "RFDS" (dataset) or "RFCK" (checkpoint)
//   u32       format version
//   u64       header length in bytes
//   header    UTF-8 JSON
//   payload   little-endian arrays described by the header
//
// Dataset payload: f64 values[n * sample_size], i32 labels[n],
// i32 condition_ids[n], u64 sample_ids[n], u8 split[n].
// Checkpoint payload: f64 parameters in ClassifierModel::parameters() order.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rfcloak/nn/model.hpp"
#include "rfcloak/nn/train.hpp"

namespace rfcloak::nn {

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_model(const ClassifierModel& model);
ClassifierModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace rfcloak::nn
