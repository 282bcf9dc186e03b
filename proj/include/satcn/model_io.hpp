#pragma once

#include <cstdint>
#include <string>

#include "satcn/model.hpp"

namespace satcn {

/// Model file: "SATCNMDL" magic, little-endian u32 JSON header length, JSON
/// header (format version, architecture, normalization, deg, config hash,
/// seed, tensor manifest), then all parameter tensors as little-endian f64
/// in manifest order. Writing is byte-deterministic for identical models.
struct ModelFile {
  SatcnModel model;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint32_t format_version = 1;
};

void save_model(const std::string& path, const SatcnModel& model,
                const std::string& config_hash, std::uint64_t seed);

ModelFile load_model(const std::string& path);

}  // namespace satcn
