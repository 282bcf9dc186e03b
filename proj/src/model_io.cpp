#include "satcn/model_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "satcn/errors.hpp"

namespace satcn {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'A', 'T', 'C', 'N', 'M', 'D', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32_le(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

double read_f64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

json arch_to_json(const ArchConfig& a) {
  return json{{"k", a.k},
              {"hidden", a.hidden},
              {"tcn_widths", a.tcn_widths},
              {"n_m", a.n_m},
              {"h", a.h},
              {"epsilon", a.epsilon},
              {"loss_masked_only", a.loss_masked_only}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.k = j.at("k").get<std::size_t>();
  a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  a.tcn_widths = j.at("tcn_widths").get<std::vector<std::size_t>>();
  a.n_m = j.at("n_m").get<std::size_t>();
  a.h = j.at("h").get<std::size_t>();
  a.epsilon = j.at("epsilon").get<double>();
  a.loss_masked_only = j.at("loss_masked_only").get<bool>();
  a.validate();
  return a;
}

}  // namespace

void save_model(const std::string& path, const SatcnModel& model,
                const std::string& config_hash, std::uint64_t seed) {
  const auto params = model.parameters();
  json tensors = json::array();
  for (const auto& [name, arr] : params) {
    tensors.push_back(json{{"name", name}, {"shape", arr->shape()}});
  }
  const json header{{"format_version", kFormatVersion},
                    {"arch", arch_to_json(model.arch)},
                    {"norm", json{{"mean", model.norm.mean}, {"std", model.norm.std}}},
                    {"deg", model.deg},
                    {"config_hash", config_hash},
                    {"seed", seed},
                    {"tensors", tensors}};
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out.write(kMagic, 8);
  write_u32_le(out, static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(),
            static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, arr] : params) {
    for (std::size_t i = 0; i < arr->size(); ++i) write_f64_le(out, (*arr)[i]);
  }
  if (!out) throw DataError(path + ": write failed");
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(path + ": not a SATCN model file (bad magic)");
  }
  const std::uint32_t header_len = read_u32_le(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw DataError(path + ": truncated header");

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed header: " + e.what());
  }

  ModelFile mf;
  try {
    mf.format_version = header.at("format_version").get<std::uint32_t>();
    if (mf.format_version != kFormatVersion) {
      throw DataError(path + ": unsupported format version " +
                      std::to_string(mf.format_version));
    }
    mf.model.arch = arch_from_json(header.at("arch"));
    mf.model.norm.mean = header.at("norm").at("mean").get<double>();
    mf.model.norm.std = header.at("norm").at("std").get<double>();
    mf.config_hash = header.at("config_hash").get<std::string>();
    mf.seed = header.at("seed").get<std::uint64_t>();

    // Materialize tensors in manifest order and validate against the
    // architecture-derived shapes.
    Rng dummy(0);
    SatcnModel skeleton = init_model(mf.model.arch, dummy);
    mf.model.san = std::move(skeleton.san);
    mf.model.tcn = std::move(skeleton.tcn);
    mf.model.proj_w = std::move(skeleton.proj_w);
    mf.model.proj_b = std::move(skeleton.proj_b);
    mf.model.set_deg(header.at("deg").get<double>());

    auto params = mf.model.parameters();
    const json& tensors = header.at("tensors");
    if (tensors.size() != params.size()) {
      throw DataError(path + ": tensor manifest does not match architecture");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      const json& t = tensors.at(p);
      if (t.at("name").get<std::string>() != params[p].first) {
        throw DataError(path + ": unexpected tensor '" +
                        t.at("name").get<std::string>() + "'");
      }
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (shape != params[p].second->shape()) {
        throw DataError(path + ": tensor shape mismatch for " + params[p].first);
      }
      Array& arr = *params[p].second;
      for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = read_f64_le(in);
    }
    if (!in) throw DataError(path + ": truncated tensor data");
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed header: " + e.what());
  }
  return mf;
}

}  // namespace satcn
