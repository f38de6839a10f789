#include "supsup/serialize.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "supsup/errors.hpp"

namespace supsup {
namespace {

constexpr char kMaskMagic[4] = {'S', 'S', 'U', 'P'};
constexpr char kSnapMagic[4] = {'S', 'S', 'N', 'P'};
constexpr char kHopMagic[4] = {'S', 'S', 'H', 'P'};

class Writer {
 public:
  void magic(const char (&m)[4]) { out_.insert(out_.end(), m, m + 4); }
  template <typename T>
  void put(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put(bits);
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void magic(const char (&m)[4], const char* what) {
    need(4, what);
    if (std::memcmp(in_.data() + pos_, m, 4) != 0)
      throw FormatError(std::string(what) + ": bad magic at offset " + std::to_string(pos_));
    pos_ += 4;
  }
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{in_[pos_ + i]} << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  double f64(const char* what) {
    const auto bits = get<std::uint64_t>(what);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n)
      throw FormatError(std::string(what) + ": truncated at offset " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + " bytes, have " +
                        std::to_string(in_.size() - pos_) + ")");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_mask(Writer& w, const Supermask& mask) {
  w.magic(kMaskMagic);
  w.put(kFormatVersion);
  if (mask.num_layers() > 0xFFFF) throw FormatError("mask has too many layers");
  w.put(static_cast<std::uint16_t>(mask.num_layers()));
  for (std::size_t l = 0; l < mask.num_layers(); ++l) {
    const Shape& s = mask.shape(l);
    if (s.rows > 0xFFFF)
      throw FormatError("mask layer " + std::to_string(l) + " has " + std::to_string(s.rows) +
                        " rows; row indices are 16-bit");
    if (s.cols > 0xFFFFFFFFu) throw FormatError("mask layer too wide");
    const std::size_t nnz = mask.count_ones(l);
    w.put(static_cast<std::uint32_t>(s.rows));
    w.put(static_cast<std::uint32_t>(s.cols));
    w.put(static_cast<std::uint64_t>(nnz));
    std::uint64_t ptr = 0;
    w.put(ptr);
    for (std::size_t c = 0; c < s.cols; ++c) {
      for (std::size_t r = 0; r < s.rows; ++r) ptr += mask.at(l, r, c);
      w.put(ptr);
    }
    for (std::size_t c = 0; c < s.cols; ++c)
      for (std::size_t r = 0; r < s.rows; ++r)
        if (mask.at(l, r, c)) w.put(static_cast<std::uint16_t>(r));
  }
}

Supermask read_mask(Reader& rd) {
  rd.magic(kMaskMagic, "mask");
  const auto version = rd.get<std::uint8_t>("mask version");
  if (version != kFormatVersion)
    throw FormatError("mask: unsupported version " + std::to_string(version));
  const auto layers = rd.get<std::uint16_t>("mask layer count");
  std::vector<Shape> shapes;
  std::vector<std::vector<std::uint64_t>> ptrs;
  std::vector<std::vector<std::uint16_t>> rows;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t r = rd.get<std::uint32_t>("mask rows");
    const std::size_t c = rd.get<std::uint32_t>("mask cols");
    const std::uint64_t nnz = rd.get<std::uint64_t>("mask nnz");
    if (nnz > static_cast<std::uint64_t>(r) * c)
      throw FormatError("mask layer " + std::to_string(l) + ": nnz exceeds rows*cols");
    std::vector<std::uint64_t> p(c + 1);
    for (auto& v : p) v = rd.get<std::uint64_t>("mask column pointers");
    if (p.front() != 0 || p.back() != nnz)
      throw FormatError("mask layer " + std::to_string(l) + ": column pointers inconsistent with nnz");
    for (std::size_t i = 0; i < c; ++i)
      if (p[i] > p[i + 1]) throw FormatError("mask layer " + std::to_string(l) + ": decreasing column pointers");
    std::vector<std::uint16_t> idx(nnz);
    for (auto& v : idx) {
      v = rd.get<std::uint16_t>("mask row indices");
      if (v >= r) throw FormatError("mask layer " + std::to_string(l) + ": row index out of range");
    }
    shapes.push_back({r, c});
    ptrs.push_back(std::move(p));
    rows.push_back(std::move(idx));
  }
  Supermask mask(shapes);
  for (std::size_t l = 0; l < layers; ++l)
    for (std::size_t c = 0; c < shapes[l].cols; ++c)
      for (std::uint64_t i = ptrs[l][c]; i < ptrs[l][c + 1]; ++i) {
        if (mask.at(l, rows[l][i], c)) throw FormatError("mask: duplicate row index");
        mask.set(l, rows[l][i], c, true);
      }
  return mask;
}

}  // namespace

std::vector<std::uint8_t> serialize_mask(const Supermask& mask) {
  Writer w;
  write_mask(w, mask);
  return w.take();
}

Supermask deserialize_mask(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  Supermask m = read_mask(rd);
  if (!rd.done()) throw FormatError("mask: trailing bytes at offset " + std::to_string(rd.pos()));
  return m;
}

std::size_t serialized_mask_size(const Supermask& mask) {
  std::size_t n = 4 + 1 + 2;
  for (std::size_t l = 0; l < mask.num_layers(); ++l)
    n += 4 + 4 + 8 + 8 * (mask.shape(l).cols + 1) + 2 * mask.count_ones(l);
  return n;
}

std::size_t bank_storage_bytes(std::span<const Supermask> masks) {
  std::size_t n = sizeof(std::uint64_t);
  for (const Supermask& m : masks) n += serialized_mask_size(m);
  return n;
}

std::vector<std::uint8_t> serialize_snapshot(const Snapshot& snap) {
  snap.config.validate();
  Writer w;
  w.magic(kSnapMagic);
  w.put(kFormatVersion);
  const NetConfig& c = snap.config;
  w.put(static_cast<std::uint32_t>(c.layer_dims.size()));
  for (std::size_t d : c.layer_dims) w.put(static_cast<std::uint64_t>(d));
  w.put(c.seed);
  w.put(static_cast<std::uint8_t>(c.nonlinearity));
  w.put(static_cast<std::uint8_t>(c.placement));
  w.put(static_cast<std::uint8_t>(c.normalization));
  w.put(static_cast<std::uint64_t>(c.real_labels));
  w.put(static_cast<std::uint64_t>(snap.masks.size()));
  for (const Supermask& m : snap.masks) {
    const auto bytes = serialize_mask(m);
    w.put(static_cast<std::uint64_t>(bytes.size()));
    w.bytes(bytes);
  }
  w.put(static_cast<std::uint8_t>(snap.hopfield.has_value()));
  if (snap.hopfield) {
    const HopfieldStore& h = *snap.hopfield;
    w.magic(kHopMagic);
    w.put(static_cast<std::uint64_t>(h.dim()));
    w.put(static_cast<std::uint64_t>(h.count));
    for (double v : h.psi.flat()) w.f64(v);
    for (double v : h.mean) w.f64(v);
  }
  return w.take();
}

Snapshot deserialize_snapshot(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  rd.magic(kSnapMagic, "snapshot");
  const auto version = rd.get<std::uint8_t>("snapshot version");
  if (version != kFormatVersion)
    throw FormatError("snapshot: unsupported version " + std::to_string(version));
  Snapshot snap;
  const auto ndims = rd.get<std::uint32_t>("snapshot dims");
  for (std::uint32_t i = 0; i < ndims; ++i) snap.config.layer_dims.push_back(rd.get<std::uint64_t>("snapshot dims"));
  snap.config.seed = rd.get<std::uint64_t>("snapshot seed");
  const auto nl = rd.get<std::uint8_t>("snapshot nonlinearity");
  const auto pl = rd.get<std::uint8_t>("snapshot placement");
  const auto nm = rd.get<std::uint8_t>("snapshot normalization");
  if (nl > 1 || pl > 1 || nm > 1) throw FormatError("snapshot: unknown network option");
  snap.config.nonlinearity = static_cast<Nonlinearity>(nl);
  snap.config.placement = static_cast<MaskPlacement>(pl);
  snap.config.normalization = static_cast<Normalization>(nm);
  snap.config.real_labels = rd.get<std::uint64_t>("snapshot real labels");
  try {
    snap.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("snapshot: invalid network config: ") + e.what());
  }
  const auto count = rd.get<std::uint64_t>("snapshot mask count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = rd.get<std::uint64_t>("snapshot mask length");
    snap.masks.push_back(deserialize_mask(rd.take(len, "snapshot mask")));
  }
  const auto has_hop = rd.get<std::uint8_t>("snapshot hopfield flag");
  if (has_hop > 1) throw FormatError("snapshot: bad hopfield flag");
  if (has_hop) {
    rd.magic(kHopMagic, "hopfield block");
    const auto d = rd.get<std::uint64_t>("hopfield dim");
    const auto k = rd.get<std::uint64_t>("hopfield count");
    if (d > (bytes.size() - rd.pos()) / 8) throw FormatError("hopfield block: truncated");
    HopfieldStore h(d);
    h.count = k;
    for (double& v : h.psi.flat()) v = rd.f64("hopfield psi");
    for (double& v : h.mean) v = rd.f64("hopfield mean");
    snap.hopfield = std::move(h);
  }
  if (!rd.done()) throw FormatError("snapshot: trailing bytes at offset " + std::to_string(rd.pos()));
  return snap;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace supsup
