#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "xdv/embedding.hpp"
#include "xdv/error.hpp"

namespace xdv {
namespace {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

  template <class T>
  T take(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string take_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  const std::string& name() const noexcept { return name_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      fail(ErrorKind::TruncatedRecord, name_ + ": truncated while reading " + what + " at byte offset " +
                                           std::to_string(pos_) + " (file has " + std::to_string(bytes_.size()) +
                                           " bytes)");
  }

  std::vector<char> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

Reader open_reader(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open embedding file '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), path.string());
}

Emb1Header parse_header(Reader& r) {
  const std::string magic = r.take_string(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) fail(ErrorKind::BadMagic, r.name() + ": missing EMB1 magic");
  Emb1Header h;
  h.version = r.take<std::uint16_t>("version");
  if (h.version != 1)
    fail(ErrorKind::VersionMismatch, r.name() + ": unsupported EMB1 version " + std::to_string(h.version));
  const auto tag_len = r.take<std::uint8_t>("layer tag length");
  h.layer_tag = r.take_string(tag_len, "layer tag");
  h.dim = r.take<std::uint32_t>("dim");
  h.count = r.take<std::uint32_t>("count");
  if (h.dim == 0) fail(ErrorKind::InvalidArgument, r.name() + ": declared dim is zero");
  return h;
}

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Emb1Header read_emb1_header(const std::filesystem::path& path) {
  Reader r = open_reader(path);
  return parse_header(r);
}

EmbeddingMap load_external(const std::filesystem::path& emb_path, Layer layer) {
  if (is_builtin(layer))
    fail(ErrorKind::LayerMismatch, "layer '" + std::string(layer_tag(layer)) + "' is built in, not loaded from EMB1");
  Reader r = open_reader(emb_path);
  const Emb1Header h = parse_header(r);
  const Layer wanted = stored_layer(layer);
  if (h.layer_tag != layer_tag(wanted))
    fail(ErrorKind::LayerMismatch, r.name() + ": file declares layer '" + h.layer_tag + "' but '" +
                                       std::string(layer_tag(layer)) + "' needs '" +
                                       std::string(layer_tag(wanted)) + "'");
  if (const auto d = expected_dim(wanted); d != 0 && h.dim != d)
    fail(ErrorKind::DimensionMismatch, r.name() + ": layer '" + h.layer_tag + "' must have dim " +
                                           std::to_string(d) + ", file declares " + std::to_string(h.dim));

  EmbeddingMap map;
  for (std::uint32_t rec = 0; rec < h.count; ++rec) {
    const std::size_t start = r.offset();
    const auto id_len = r.take<std::uint16_t>("record id length");
    FeatureVector v;
    v.meta.sample_id = r.take_string(id_len, "record id");
    const auto domain = r.take<std::uint8_t>("record domain");
    if (domain > 1)
      fail(ErrorKind::UnknownDomain, r.name() + ": record " + std::to_string(rec) + " at byte offset " +
                                         std::to_string(start) + " has domain byte " + std::to_string(domain));
    v.meta.domain = static_cast<Domain>(domain);
    v.meta.embedder = "external";
    v.meta.layer = h.layer_tag;
    v.values.resize(h.dim);
    for (std::uint32_t i = 0; i < h.dim; ++i) {
      const float f = r.take<float>("record values");
      if (!std::isfinite(f))
        fail(ErrorKind::NonFinite, r.name() + ": record " + std::to_string(rec) + " ('" + v.meta.sample_id +
                                       "') has a non-finite value at index " + std::to_string(i));
      v.values[i] = f;
    }
    EmbeddingKey key{v.meta.sample_id, v.meta.domain};
    if (map.contains(key))
      fail(ErrorKind::DuplicateRecord, r.name() + ": duplicate record for '" + key.subject_id + "/" +
                                           std::string(to_string(key.domain)) + "' at byte offset " +
                                           std::to_string(start));
    map.emplace(std::move(key), std::move(v));
  }
  if (r.remaining() != 0)
    fail(ErrorKind::InvalidArgument, r.name() + ": " + std::to_string(r.remaining()) +
                                         " trailing bytes after the declared records");
  return map;
}

void write_emb1(const std::filesystem::path& path, std::string_view layer_tag, std::span<const FeatureVector> vectors) {
  if (layer_tag.empty() || layer_tag.size() > 255) fail(ErrorKind::InvalidArgument, "EMB1 layer tag must be 1-255 bytes");
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().dim();
  if (dim == 0) fail(ErrorKind::InvalidArgument, "EMB1 needs at least one non-empty vector");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out.write(kMagic, 4);
  put<std::uint16_t>(out, 1);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(layer_tag.size()));
  out.write(layer_tag.data(), static_cast<std::streamsize>(layer_tag.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(vectors.size()));
  for (const auto& v : vectors) {
    if (v.dim() != dim) fail(ErrorKind::DimensionMismatch, "EMB1 vectors must share one dimension");
    if (v.meta.sample_id.size() > 0xFFFF) fail(ErrorKind::InvalidArgument, "EMB1 id longer than 65535 bytes");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(v.meta.sample_id.size()));
    out.write(v.meta.sample_id.data(), static_cast<std::streamsize>(v.meta.sample_id.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(v.meta.domain));
    for (double x : v.values) put<float>(out, static_cast<float>(x));
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

}  // namespace xdv
