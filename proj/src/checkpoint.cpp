#include "neurphy/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

#include "neurphy/error.hpp"
#include "neurphy/io_util.hpp"

namespace neurphy {

namespace {

constexpr std::string_view kMagic = "NPHY";

template <class U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string_view take(std::uint64_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw Error(ErrorCode::kCorrupt, "checkpoint is truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const NeurPhyModel& model, const RunConfig& cfg) {
  std::string out(kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg_text = config_to_json(cfg).dump();
  put<std::uint64_t>(out, cfg_text.size());
  out += cfg_text;
  const auto& store = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put<std::uint64_t>(out, d);
    for (double v : p.value.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  put<std::uint32_t>(out, crc32_of(out));
  return out;
}

Checkpoint checkpoint_from_bytes(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::kCorrupt, "not a checkpoint (bad magic)");
  }
  Reader header(bytes.substr(kMagic.size()));
  const auto version = header.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormatVersionMismatch,
                "checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.get<std::uint32_t>() != crc32_of(body)) throw Error(ErrorCode::kCorrupt, "checkpoint checksum mismatch");

  Reader in(body.substr(kMagic.size() + 4));
  const auto cfg_len = in.get<std::uint64_t>();
  RunConfig cfg;
  try {
    cfg = config_from_json(nlohmann::ordered_json::parse(in.take(cfg_len)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorrupt, std::string("checkpoint config: ") + e.what());
  }
  NeurPhyModel model(cfg.model);
  auto& store = model.parameters();
  const auto count = in.get<std::uint32_t>();
  if (count != store.size()) throw Error(ErrorCode::kCorrupt, "checkpoint parameter count does not match its config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name(in.take(in.get<std::uint32_t>()));
    auto& slot = store[i];
    if (name != slot.name) throw Error(ErrorCode::kCorrupt, "unexpected parameter '" + name + "'");
    const auto rank = in.get<std::uint32_t>();
    ad::Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
    if (shape != slot.value.shape()) throw Error(ErrorCode::kCorrupt, "shape mismatch for '" + name + "'");
    for (double& v : slot.value.data()) v = std::bit_cast<double>(in.get<std::uint64_t>());
  }
  if (!in.done()) throw Error(ErrorCode::kCorrupt, "trailing bytes after parameters");
  return {std::move(cfg), std::move(model)};
}

void checkpoint_save(const NeurPhyModel& model, const RunConfig& cfg, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_bytes(model, cfg));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) { return checkpoint_from_bytes(read_file(path)); }

}  // namespace neurphy
