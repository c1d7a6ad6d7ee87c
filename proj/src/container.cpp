#include "nogap/container.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nogap/errors.hpp"

namespace nogap::io {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string fixed(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string str() { return fixed(u32()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("container truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::set_meta(const std::string& key, std::string value) {
  for (auto& [k, v] : metadata) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  metadata.emplace_back(key, std::move(value));
}

std::optional<std::string> Container::find_meta(std::string_view key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& Container::meta(std::string_view key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  throw FormatError("missing metadata key '" + std::string(key) + "'");
}

void Container::add_tensor(std::string name, Tensor value) {
  for (auto& [n, t] : tensors) {
    if (n == name) {
      t = std::move(value);
      return;
    }
  }
  tensors.emplace_back(std::move(name), std::move(value));
}

const Tensor* Container::find_tensor(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& Container::tensor(std::string_view name) const {
  if (const Tensor* t = find_tensor(name)) return *t;
  throw FormatError("missing tensor '" + std::string(name) + "'");
}

std::vector<std::uint8_t> encode(const Container& c) {
  if (c.magic.size() != 4) throw ContractError("container magic must be 4 bytes");
  Writer w;
  w.bytes(c.magic);
  w.u32(c.version);
  w.u32(static_cast<std::uint32_t>(c.metadata.size()));
  for (const auto& [k, v] : c.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  const std::uint32_t crc = crc32(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

Container decode(std::span<const std::uint8_t> bytes, std::string_view expected_magic) {
  if (bytes.size() < 12) throw FormatError("container truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (tail.u32() != crc32(body)) throw FormatError("container checksum mismatch (corrupt or truncated file)");

  Reader r(body);
  Container c;
  c.magic = r.fixed(4);
  if (c.magic != expected_magic) {
    throw FormatError("bad magic '" + c.magic + "', expected '" + std::string(expected_magic) + "'");
  }
  c.version = r.u32();
  if (c.version != kFormatVersion) {
    throw FormatError("unsupported container version " + std::to_string(c.version));
  }
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    c.metadata.emplace_back(std::move(k), std::move(v));
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      d = r.u64();
      if (d == 0) throw FormatError("tensor '" + name + "' has a zero dimension");
      count *= d;
    }
    if (count > r.remaining() / 8) throw FormatError("tensor '" + name + "' payload truncated");
    std::vector<double> data(count);
    for (auto& v : data) v = r.f64();
    try {
      c.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    } catch (const DomainError& e) {
      throw FormatError(std::string("non-finite payload: ") + e.what());
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after container body");
  return c;
}

void write_file(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open '" + tmp.string() + "' for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Container read_file(const std::filesystem::path& path, std::string_view expected_magic) {
  return decode(read_bytes(path), expected_magic);
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string content_hash(std::span<const std::uint8_t> bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string file_content_hash(const std::filesystem::path& path) { return content_hash(read_bytes(path)); }

}  // namespace nogap::io
