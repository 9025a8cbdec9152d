#include "brainnet/checkpoint.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "brainnet/error.hpp"

namespace brainnet {
namespace {

constexpr std::string_view kMagic{"BNCKPT\0\0", 8};

}  // namespace

const Matrix& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return m;
  fail(ErrorCode::kDataValidation, "checkpoint has no array '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& entry : arrays)
    if (entry.first == name) return true;
  return false;
}

void store_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(0);
  w.u64(0);
  nlohmann::json header = ckpt.header;
  header["kind"] = ckpt.kind;
  w.string(header.dump());
  w.u64(ckpt.arrays.size());
  for (const auto& [name, m] : ckpt.arrays) {
    w.string(name);
    w.u64(m.rows());
    w.u64(m.cols());
    for (double v : m.values()) w.f64(v);
  }
  w.patch_u64(16, w.size() + 4);
  w.seal();
  w.write_to(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  r.need(24);
  require(r.bytes(8) == kMagic, ErrorCode::kIo, "'" + path.string() + "' is not a brainnet checkpoint");
  const std::uint32_t version = r.u32();
  require(version >= 1 && version <= kCheckpointVersion, ErrorCode::kVersionMismatch,
          "'" + path.string() + "' has checkpoint version " + std::to_string(version));
  r.u32();
  const std::uint64_t total = r.u64();
  require(r.size() >= total, ErrorCode::kTruncated, "'" + path.string() + "' is truncated");
  require(r.size() == total, ErrorCode::kChecksum, "'" + path.string() + "' has trailing bytes");
  r.verify_checksum();
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(r.string());
    ckpt.kind = ckpt.header.at("kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDataValidation, "bad checkpoint header in '" + path.string() + "': " + e.what());
  }
  const std::size_t n = r.checked_count(r.u64(), 24);
  for (std::size_t i = 0; i < n; ++i) {
    std::string name = r.string();
    const std::size_t rows = r.checked_count(r.u64(), 1);
    const std::size_t cols = r.checked_count(r.u64(), 1);
    require(rows == 0 || cols <= r.remaining() / 8 / rows, ErrorCode::kTruncated, "array larger than file");
    Matrix m(rows, cols);
    for (double& v : m.values()) v = r.f64();
    ckpt.arrays.emplace_back(std::move(name), std::move(m));
  }
  return ckpt;
}

void export_parameters(Checkpoint& ckpt, std::span<ad::Parameter* const> params, const std::string& prefix) {
  for (const ad::Parameter* p : params) ckpt.arrays.emplace_back(prefix + p->name, p->value);
}

void import_parameters(const Checkpoint& ckpt, std::span<ad::Parameter* const> params, const std::string& prefix) {
  for (ad::Parameter* p : params) {
    const Matrix& m = ckpt.array(prefix + p->name);
    require(m.same_shape(p->value), ErrorCode::kShape,
            "checkpoint array '" + prefix + p->name + "' is " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", model expects " + std::to_string(p->value.rows()) + "x" +
                std::to_string(p->value.cols()));
    for (double v : m.values()) require(std::isfinite(v), ErrorCode::kDataValidation, "non-finite checkpoint value");
    p->value = m;
    p->zero_grad();
  }
}

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

Matrix glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return random_normal(fan_in, fan_out, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)), rng);
}

}  // namespace brainnet
