#pragma once

// Versioned binary checkpoints: a JSON header (kind, config echo, manifest)
// followed by named double-precision arrays and a CRC-32 trailer.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/autodiff.hpp"

namespace brainnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;
  nlohmann::json header = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix& array(const std::string& name) const;
  bool has(const std::string& name) const;
};

void store_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Appends every parameter value under prefix + parameter name.
void export_parameters(Checkpoint& ckpt, std::span<ad::Parameter* const> params, const std::string& prefix = "");
// Overwrites parameter values from the checkpoint; kShape on a shape mismatch,
// kDataValidation when a parameter is missing.
void import_parameters(const Checkpoint& ckpt, std::span<ad::Parameter* const> params, const std::string& prefix = "");

// Normal(0, stddev) entries.
Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);
// Normal with stddev sqrt(2 / (fan_in + fan_out)).
Matrix glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace brainnet
