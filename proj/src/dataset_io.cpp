#include <fstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "brainnet/error.hpp"
#include "brainnet/seeg_data.hpp"

namespace brainnet::data {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic{"BNSEEG\0\0", 8};
constexpr std::uint32_t kKindRecording = 1;
constexpr std::uint32_t kKindSegments = 2;
constexpr std::uint32_t kTypeF32 = 1;
constexpr std::uint32_t kTypeU8 = 2;

enum BlockTag : std::uint32_t {
  kSamples = 1,
  kPointLabels = 2,
  kSegmentData = 3,
  kChannelLabels = 4,
};

json map_to_json(const ChannelMap& map) {
  return json{{"channels", map.channels()}, {"regions", map.regions()}, {"assignment", map.assignment()}};
}

ChannelMap map_from_json(const json& j) {
  return ChannelMap(j.at("channels").get<std::vector<std::string>>(), j.at("regions").get<std::vector<std::string>>(),
                    j.at("assignment").get<std::vector<std::size_t>>());
}

void write_f32_block(io::ByteWriter& w, std::uint32_t tag, const std::vector<float>& v) {
  w.u32(tag);
  w.u32(kTypeF32);
  w.u64(v.size());
  for (float x : v) w.f32(x);
}

void write_u8_block(io::ByteWriter& w, std::uint32_t tag, const std::vector<std::uint8_t>& v) {
  w.u32(tag);
  w.u32(kTypeU8);
  w.u64(v.size());
  for (auto x : v) w.u8(x);
}

std::vector<float> read_f32_block(io::ByteReader& r, std::uint32_t tag) {
  require(r.u32() == tag, ErrorCode::kDataValidation, "unexpected block in '" + r.origin() + "'");
  require(r.u32() == kTypeF32, ErrorCode::kDataValidation, "block type mismatch in '" + r.origin() + "'");
  std::vector<float> v(r.checked_count(r.u64(), 4));
  for (float& x : v) x = r.f32();
  return v;
}

std::vector<std::uint8_t> read_u8_block(io::ByteReader& r, std::uint32_t tag) {
  require(r.u32() == tag, ErrorCode::kDataValidation, "unexpected block in '" + r.origin() + "'");
  require(r.u32() == kTypeU8, ErrorCode::kDataValidation, "block type mismatch in '" + r.origin() + "'");
  std::vector<std::uint8_t> v(r.checked_count(r.u64(), 1));
  for (auto& x : v) x = r.u8();
  return v;
}

io::ByteWriter begin_file(std::uint32_t kind, const json& meta) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kFormatVersion);
  w.u32(kind);
  w.u64(0);  // total size, patched in finish_file
  w.string(meta.dump());
  return w;
}

void finish_file(io::ByteWriter& w, const json& meta, const std::filesystem::path& path) {
  w.patch_u64(16, w.size() + 4);
  w.seal();
  w.write_to(path);
  std::ofstream side(path.string() + ".meta.json", std::ios::trunc);
  require(static_cast<bool>(side), ErrorCode::kIo, "cannot write metadata sidecar for '" + path.string() + "'");
  side << meta.dump(2) << '\n';
}

json open_file(io::ByteReader& r, std::uint32_t kind) {
  r.need(24);
  require(r.bytes(8) == kMagic, ErrorCode::kIo, "'" + r.origin() + "' is not a brainnet dataset");
  const std::uint32_t version = r.u32();
  require(version >= 1 && version <= kFormatVersion, ErrorCode::kVersionMismatch,
          "'" + r.origin() + "' has format version " + std::to_string(version) + ", this build reads up to " +
              std::to_string(kFormatVersion));
  const std::uint32_t stored_kind = r.u32();
  const std::uint64_t total = r.u64();
  require(r.size() >= total, ErrorCode::kTruncated,
          "'" + r.origin() + "' holds " + std::to_string(r.size()) + " of " + std::to_string(total) + " bytes");
  require(r.size() == total, ErrorCode::kChecksum, "'" + r.origin() + "' has trailing bytes");
  r.verify_checksum();
  require(stored_kind == kind, ErrorCode::kDataValidation,
          "'" + r.origin() + "' holds a " + std::string(stored_kind == kKindRecording ? "recording" : "segment set"));
  try {
    return json::parse(r.string());
  } catch (const json::exception& e) {
    fail(ErrorCode::kDataValidation, "bad metadata in '" + r.origin() + "': " + e.what());
  }
}

}  // namespace

void store(const Recording& recording, const std::filesystem::path& path) {
  json meta{{"format", "brainnet-seeg"},
            {"version", kFormatVersion},
            {"kind", "recording"},
            {"n_points", recording.n_points()},
            {"n_channels", recording.n_channels()},
            {"sample_rate", recording.sample_rate()},
            {"channel_map", map_to_json(recording.channel_map())},
            {"provenance", recording.provenance().empty() ? json(nullptr) : json::parse(recording.provenance())}};
  io::ByteWriter w = begin_file(kKindRecording, meta);
  write_f32_block(w, kSamples, recording.samples());
  write_u8_block(w, kPointLabels, recording.labels());
  finish_file(w, meta, path);
}

void store(const SegmentSet& segments, const std::filesystem::path& path) {
  json meta{{"format", "brainnet-seeg"},
            {"version", kFormatVersion},
            {"kind", "segments"},
            {"n_segments", segments.size()},
            {"n_channels", segments.n_channels()},
            {"window", segments.config().window},
            {"stride", segments.config().stride},
            {"origin", segments.origin()},
            {"sample_rate", segments.sample_rate()},
            {"channel_map", map_to_json(segments.channel_map())}};
  io::ByteWriter w = begin_file(kKindSegments, meta);
  write_f32_block(w, kSegmentData, segments.data());
  write_u8_block(w, kChannelLabels, segments.channel_labels().values);
  finish_file(w, meta, path);
}

Recording load_recording(const std::filesystem::path& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  const json meta = open_file(r, kKindRecording);
  auto samples = read_f32_block(r, kSamples);
  auto labels = read_u8_block(r, kPointLabels);
  try {
    const json& prov = meta.at("provenance");
    return Recording(std::move(samples), std::move(labels), meta.at("sample_rate").get<double>(),
                     map_from_json(meta.at("channel_map")), prov.is_null() ? std::string() : prov.dump());
  } catch (const json::exception& e) {
    fail(ErrorCode::kDataValidation, "bad metadata in '" + path.string() + "': " + e.what());
  }
}

SegmentSet load_segments(const std::filesystem::path& path) {
  io::ByteReader r = io::ByteReader::from_file(path);
  const json meta = open_file(r, kKindSegments);
  auto data = read_f32_block(r, kSegmentData);
  auto labels = read_u8_block(r, kChannelLabels);
  try {
    ChannelMap map = map_from_json(meta.at("channel_map"));
    BinaryMatrix y(meta.at("n_segments").get<std::size_t>(), map.n_channels());
    require(labels.size() == y.values.size(), ErrorCode::kDataValidation, "label block size mismatch");
    y.values = std::move(labels);
    SegmentationConfig cfg{meta.at("window").get<std::size_t>(), meta.at("stride").get<std::size_t>()};
    return SegmentSet(std::move(data), std::move(y), cfg, std::move(map), meta.at("sample_rate").get<double>(),
                      meta.at("origin").get<std::size_t>());
  } catch (const json::exception& e) {
    fail(ErrorCode::kDataValidation, "bad metadata in '" + path.string() + "': " + e.what());
  }
}

}  // namespace brainnet::data
