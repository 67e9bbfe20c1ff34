#include "psketch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace psketch {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little endian");

constexpr char kMagic[8] = {'P', 'S', 'K', 'T', 'C', 'H', 'K', '\0'};

enum class Tag : std::uint8_t { f64 = 1, u64 = 2, str = 3 };

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void str(const std::string& s) {
    pod(static_cast<std::uint64_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <class T>
  T pod() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bytes(void* p, std::size_t n) {
    need(n);
    if (n) std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const std::string& name, std::vector<std::uint64_t> shape,
                     std::span<const double> values) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size()) throw CheckpointError("checkpoint: shape does not match data for " + name);
  entries_[name] = F64Array{std::move(shape), {values.begin(), values.end()}};
}

void Checkpoint::put(const std::string& name, std::span<const double> values) {
  put(name, {values.size()}, values);
}

void Checkpoint::put_u64(const std::string& name, std::vector<std::uint64_t> values) {
  entries_[name] = std::move(values);
}

void Checkpoint::put_string(const std::string& name, std::string value) {
  entries_[name] = std::move(value);
}

namespace {

template <class T>
const T& get_as(const std::map<std::string, Checkpoint::Entry>& entries, const std::string& name) {
  auto it = entries.find(name);
  if (it == entries.end()) throw CheckpointError("checkpoint: missing entry " + name);
  const T* v = std::get_if<T>(&it->second);
  if (v == nullptr) throw CheckpointError("checkpoint: entry " + name + " has the wrong type");
  return *v;
}

}  // namespace

const F64Array& Checkpoint::array(const std::string& name) const {
  return get_as<F64Array>(entries_, name);
}

void Checkpoint::read_into(const std::string& name, std::span<double> out) const {
  const auto& a = array(name);
  if (a.values.size() != out.size()) {
    throw CheckpointError("checkpoint: entry " + name + " has " + std::to_string(a.values.size()) +
                          " values, expected " + std::to_string(out.size()));
  }
  std::copy(a.values.begin(), a.values.end(), out.begin());
}

const std::vector<std::uint64_t>& Checkpoint::u64s(const std::string& name) const {
  return get_as<std::vector<std::uint64_t>>(entries_, name);
}

std::uint64_t Checkpoint::u64(const std::string& name) const {
  const auto& v = u64s(name);
  if (v.size() != 1) throw CheckpointError("checkpoint: entry " + name + " is not a scalar");
  return v[0];
}

const std::string& Checkpoint::string(const std::string& name) const {
  return get_as<std::string>(entries_, name);
}

std::string Checkpoint::to_bytes() const {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod(kCheckpointVersion);
  w.pod(static_cast<std::uint64_t>(entries_.size()));
  for (const auto& [name, entry] : entries_) {
    w.str(name);
    if (const auto* a = std::get_if<F64Array>(&entry)) {
      w.pod(Tag::f64);
      w.pod(static_cast<std::uint64_t>(a->shape.size()));
      for (auto d : a->shape) w.pod(d);
      w.pod(static_cast<std::uint64_t>(a->values.size()));
      w.bytes(a->values.data(), a->values.size() * sizeof(double));
    } else if (const auto* u = std::get_if<std::vector<std::uint64_t>>(&entry)) {
      w.pod(Tag::u64);
      w.pod(static_cast<std::uint64_t>(u->size()));
      w.bytes(u->data(), u->size() * sizeof(std::uint64_t));
    } else {
      w.pod(Tag::str);
      w.str(std::get<std::string>(entry));
    }
  }
  return w.take();
}

Checkpoint Checkpoint::from_bytes(const std::string& bytes) {
  Reader r(bytes);
  char magic[sizeof kMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = r.str();
    const auto tag = r.pod<Tag>();
    if (tag == Tag::f64) {
      F64Array a;
      a.shape.resize(r.pod<std::uint64_t>());
      for (auto& d : a.shape) d = r.pod<std::uint64_t>();
      const auto n = r.pod<std::uint64_t>();
      if (n > bytes.size() / sizeof(double)) throw CheckpointError("checkpoint: corrupt array size");
      a.values.resize(n);
      r.bytes(a.values.data(), n * sizeof(double));
      c.entries_[name] = std::move(a);
    } else if (tag == Tag::u64) {
      const auto n = r.pod<std::uint64_t>();
      if (n > bytes.size() / sizeof(std::uint64_t)) throw CheckpointError("checkpoint: corrupt array size");
      std::vector<std::uint64_t> v(n);
      r.bytes(v.data(), n * sizeof(std::uint64_t));
      c.entries_[name] = std::move(v);
    } else if (tag == Tag::str) {
      c.entries_[name] = r.str();
    } else {
      throw CheckpointError("checkpoint: unknown entry tag");
    }
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes");
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  // Write-then-rename so an interrupted save never clobbers the previous file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint " + tmp.string());
    const std::string bytes = to_bytes();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_bytes(ss.str());
}

}  // namespace psketch
