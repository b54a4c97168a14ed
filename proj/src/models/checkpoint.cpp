#include "gnp/models/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace gnp::models {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'P', 'C'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_uint(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, const std::string& s) {
  put_uint<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T uint(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string string(const char* what) {
    const auto n = uint<std::uint64_t>(what);
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(fmt::format("checkpoint truncated while reading {} at byte {}", what, pos_));
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Model& model) {
  std::string out(kMagic, kMagic + 4);
  put_uint(out, kVersion);
  put_string(out, model.spec().canonical_text());
  const auto& entries = model.params().entries();
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    put_string(out, e.name);
    put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) put_uint<std::uint64_t>(out, d);
    out.push_back(e.trainable ? 1 : 0);
    put_uint(out, offset);
    offset += e.value.size() * sizeof(double);
  }
  put_uint(out, offset);
  for (const auto& e : entries)
    for (double v : e.value.values()) put_uint(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Model deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: bad magic (not a GNPC file)");
  }
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.uint<std::uint8_t>("magic");
  const auto version = r.uint<std::uint32_t>("version");
  if (version != kVersion) throw CheckpointError(fmt::format("checkpoint: unsupported version {}", version));
  ModelSpec spec;
  try {
    spec = ModelSpec::parse_canonical(r.string("model spec"));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(fmt::format("checkpoint: invalid model spec: {}", e.what()));
  }

  struct Index {
    std::string name;
    nd::Shape shape;
    bool trainable;
    std::uint64_t offset;
  };
  const auto count = r.uint<std::uint32_t>("entry count");
  std::vector<Index> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    Index e;
    e.name = r.string("entry name");
    const auto rank = r.uint<std::uint32_t>("rank");
    if (rank > 8) throw CheckpointError(fmt::format("checkpoint: entry '{}' has rank {}", e.name, rank));
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.uint<std::uint64_t>("dimension"));
    e.trainable = r.uint<std::uint8_t>("trainable flag") != 0;
    e.offset = r.uint<std::uint64_t>("offset");
    index.push_back(std::move(e));
  }
  const auto payload = r.uint<std::uint64_t>("payload size");
  if (payload != r.remaining()) {
    throw CheckpointError(
        fmt::format("checkpoint: payload declares {} bytes but {} remain", payload, r.remaining()));
  }

  nd::ParamStore store;
  std::uint64_t expected_offset = 0;
  for (const auto& e : index) {
    if (e.offset != expected_offset) {
      throw CheckpointError(fmt::format("checkpoint: entry '{}' at offset {}, expected {}", e.name, e.offset,
                                        expected_offset));
    }
    nd::Tensor t(e.shape);
    if ((payload - expected_offset) / sizeof(double) < t.size()) {
      throw CheckpointError(fmt::format("checkpoint: payload too short for entry '{}'", e.name));
    }
    for (double& v : t.values()) v = r.f64("payload");
    expected_offset += t.size() * sizeof(double);
    store.add(e.name, std::move(t), e.trainable);
  }
  if (expected_offset != payload) throw CheckpointError("checkpoint: trailing payload bytes");
  try {
    return Model(std::move(spec), std::move(store));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(fmt::format("checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(fmt::format("checkpoint: cannot open '{}' for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(fmt::format("checkpoint: write to '{}' failed", path.string()));
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("checkpoint: cannot open '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace gnp::models
