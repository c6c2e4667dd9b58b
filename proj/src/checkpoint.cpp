#include "zcap/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace zcap {

namespace {

void put_u32(std::string& buf, uint32_t x) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  buf.append(b, 4);
}

void put_u64(std::string& buf, uint64_t x) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
  buf.append(b, 8);
}

struct Reader {
  const char* p;
  const char* end;
  void need(size_t n) const {
    if (static_cast<size_t>(end - p) < n) throw std::runtime_error("checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    p += 4;
    return x;
  }
  uint64_t u64() {
    need(8);
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    p += 8;
    return x;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(p, n);
    p += n;
    return s;
  }
  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    p += 8;
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
};

}  // namespace

void atomic_write_bytes(const std::filesystem::path& path, const void* data, size_t size) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
  atomic_write_bytes(path, content.data(), content.size());
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries) {
  std::string buf;
  buf.append(kCheckpointMagic, 4);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<uint32_t>(tensor->shape.size()));
    for (size_t d : tensor->shape) put_u64(buf, static_cast<uint64_t>(d));
    for (double x : tensor->v) {
      uint64_t bits;
      std::memcpy(&bits, &x, 8);
      put_u64(buf, bits);
    }
  }
  atomic_write_bytes(path, buf.data(), buf.size());
}

std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{data.data(), data.data() + data.size()};
  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path.string());
  const uint32_t count = r.u32();
  std::map<std::string, Tensor> out;
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const uint32_t rank = r.u32();
    std::vector<size_t> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<size_t>(r.u64());
    Tensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) t.v[i] = r.f64();
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace zcap
