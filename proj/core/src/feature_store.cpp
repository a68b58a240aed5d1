#include "mufnet/feature_store.hpp"

#include <cmath>

#include "mufnet/binary_io.hpp"
#include "mufnet/errors.hpp"

namespace mufnet {

namespace {

constexpr std::string_view kMagic = "MFS1";

constexpr StreamTag kOrder[] = {StreamTag::clip_image, StreamTag::resnet_image,
                                StreamTag::clip_text, StreamTag::bert_text};

const FeatureSeq& stream(const Streams& s, int i) {
  switch (i) {
    case 0: return s.clip_image;
    case 1: return s.resnet_image;
    case 2: return s.clip_text;
    default: return s.bert_text;
  }
}

FeatureSeq& stream(Streams& s, int i) {
  return const_cast<FeatureSeq&>(stream(static_cast<const Streams&>(s), i));
}

}  // namespace

FeatureStore::FeatureStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("feature store dim must be >= 1");
}

const Streams& FeatureStore::at(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw LookupError("feature store has no entry for id '" + id + "'");
  return it->second;
}

void FeatureStore::insert(const std::string& id, Streams streams) {
  if (id.empty() || id.size() > kMaxIdBytes) {
    throw ContractError("feature store id must be 1.." + std::to_string(kMaxIdBytes) +
                        " bytes, got " + std::to_string(id.size()));
  }
  if (contains(id)) throw ContractError("duplicate feature store id '" + id + "'");
  for (int i = 0; i < 4; ++i) {
    FeatureSeq& s = stream(streams, i);
    s.tag = kOrder[i];
    if (s.tokens.empty() || s.dim() != dim_) {
      throw DimensionError("feature store entry '" + id + "' stream " +
                           std::string(to_string(kOrder[i])) + " has shape " +
                           s.tokens.shape_string() + ", store dim " + std::to_string(dim_));
    }
    if (!s.tokens.all_finite()) {
      throw NumericError("feature store entry '" + id + "' has non-finite values");
    }
  }
  entries_.emplace(id, std::move(streams));
  order_.push_back(id);
}

std::vector<std::uint8_t> encode_feature_store(const FeatureStore& store) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kFeatureStoreVersion);
  w.u32(static_cast<std::uint32_t>(store.dim()));
  w.u64(store.size());
  for (const auto& id : store.ids()) {
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.bytes(id);
    const Streams& s = store.at(id);
    for (int i = 0; i < 4; ++i) {
      const FeatureSeq& seq = stream(s, i);
      w.u32(static_cast<std::uint32_t>(seq.len()));
      for (double v : seq.tokens.values()) w.f32(static_cast<float>(v));
    }
  }
  return w.take();
}

FeatureStore decode_feature_store(std::span<const std::uint8_t> bytes) {
  using Kind = FormatError::Kind;
  ByteReader r(bytes);
  if (r.remaining() < kMagic.size() || r.bytes(kMagic.size(), "magic") != kMagic) {
    throw FormatError(Kind::bad_magic, 0, "expected \"MFS1\"");
  }
  const auto version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kFeatureStoreVersion) {
    throw FormatError(Kind::bad_version, version_at,
                      "unsupported version " + std::to_string(version));
  }
  const auto dim_at = r.offset();
  const auto dim = r.u32("dim");
  if (dim == 0) throw FormatError(Kind::invalid_value, dim_at, "dim must be >= 1");
  const auto count_at = r.offset();
  const auto count = r.u64("entry count");
  // Smallest possible entry: id_len + 1 id byte + 4 blocks of one row each.
  const std::uint64_t min_entry = 2 + 1 + 4 * (4 + 4ULL * dim);
  if (count > r.remaining() / min_entry) {
    throw FormatError(Kind::truncated, count_at,
                      "entry count " + std::to_string(count) + " exceeds file size");
  }

  FeatureStore store(dim);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto entry_at = r.offset();
    const auto id_len = r.u16("id length");
    if (id_len == 0 || id_len > kMaxIdBytes) {
      throw FormatError(Kind::invalid_value, entry_at,
                        "id length " + std::to_string(id_len) + " outside 1.." +
                            std::to_string(kMaxIdBytes));
    }
    std::string id = r.bytes(id_len, "id");
    if (store.contains(id)) {
      throw FormatError(Kind::duplicate_id, entry_at, "id '" + id + "' appears twice");
    }
    Streams streams;
    for (int i = 0; i < 4; ++i) {
      const auto block_at = r.offset();
      const auto seq_len = r.u32("sequence length");
      if (seq_len == 0) {
        throw FormatError(Kind::invalid_value, block_at,
                          std::string(to_string(kOrder[i])) + " sequence length is 0");
      }
      const std::uint64_t n = static_cast<std::uint64_t>(seq_len) * dim;
      r.require(4 * n, to_string(kOrder[i]));
      std::vector<double> values(n);
      for (auto& v : values) {
        const auto at = r.offset();
        const float f = r.f32("value");
        if (!std::isfinite(f)) {
          throw FormatError(Kind::invalid_value, at, "non-finite feature value");
        }
        v = f;
      }
      stream(streams, i) = FeatureSeq{kOrder[i], Matrix(seq_len, dim, std::move(values))};
    }
    store.insert(id, std::move(streams));
  }
  if (!r.at_end()) {
    throw FormatError(Kind::trailing_bytes, r.offset(),
                      std::to_string(r.remaining()) + " bytes after last entry");
  }
  return store;
}

FeatureStore load_feature_store(const std::string& path) {
  return decode_feature_store(read_file_bytes(path));
}

void save_feature_store(const FeatureStore& store, const std::string& path) {
  write_file_bytes(path, encode_feature_store(store));
}

}  // namespace mufnet
