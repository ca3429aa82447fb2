#include "scenediff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace scenediff {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'N', 'D', 'I', 'F', 'F', '1'};

void append_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_real(std::string& buf, real v) {
  if constexpr (sizeof(real) == 8) {
    append_u64(buf, std::bit_cast<uint64_t>(static_cast<double>(v)));
  } else {
    append_u32(buf, std::bit_cast<uint32_t>(static_cast<float>(v)));
  }
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf_[pos_++]);
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }

  int64_t i64() { return static_cast<int64_t>(u64()); }

  std::string bytes(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  real real_at_width(int width) {
    if (width == 8) return static_cast<real>(std::bit_cast<double>(u64()));
    return static_cast<real>(std::bit_cast<float>(u32()));
  }

  size_t pos() const { return pos_; }

 private:
  void need(size_t n) {
    if (pos_ + n > buf_.size()) {
      throw ValidationError("checkpoint '" + path_ + "' is truncated");
    }
  }

  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : params) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::unordered_set<std::string> seen;
  for (const auto& [name, t] : ckpt.params) {
    if (!seen.insert(name).second) {
      throw ValidationError("checkpoint has duplicate parameter '" + name + "'");
    }
    if (!t.defined()) throw ValidationError("checkpoint parameter '" + name + "' is undefined");
  }

  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  buf.push_back(static_cast<char>(sizeof(real)));
  append_u32(buf, static_cast<uint32_t>(ckpt.meta_json.size()));
  buf += ckpt.meta_json;
  append_u32(buf, static_cast<uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    append_u32(buf, static_cast<uint32_t>(name.size()));
    buf += name;
    append_u32(buf, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) append_u64(buf, static_cast<uint64_t>(d));
    for (real v : t.data()) append_real(buf, v);
  }
  append_u64(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write checkpoint '" + path + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ValidationError("short write to checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < sizeof(kMagic) + 8) {
    throw ValidationError("checkpoint '" + path + "' is truncated");
  }
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("checkpoint '" + path + "' has wrong magic");
  }
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<uint64_t>(static_cast<uint8_t>(buf[buf.size() - 8 + i])) << (8 * i);
  }
  if (fnv1a64(buf.data(), buf.size() - 8) != stored) {
    throw ValidationError("checkpoint '" + path + "' failed its checksum");
  }

  Reader r(buf, path);
  r.bytes(sizeof(kMagic));
  const int width = r.u8();
  if (width != 4 && width != 8) {
    throw ValidationError("checkpoint '" + path + "' has unsupported float width " +
                          std::to_string(width));
  }
  Checkpoint ckpt;
  ckpt.meta_json = r.bytes(r.u32());
  const uint32_t count = r.u32();
  std::unordered_set<std::string> seen;
  for (uint32_t p = 0; p < count; ++p) {
    std::string name = r.bytes(r.u32());
    if (!seen.insert(name).second) {
      throw ValidationError("checkpoint '" + path + "' has duplicate parameter '" + name + "'");
    }
    const uint32_t rank = r.u32();
    if (rank > 8) throw ValidationError("checkpoint '" + path + "' has implausible rank");
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = r.i64();
      if (shape[d] <= 0 || shape[d] > (1 << 24)) {
        throw ValidationError("checkpoint '" + path + "' has invalid extent");
      }
    }
    const int64_t n = numel(shape);
    std::vector<real> data(static_cast<size_t>(n));
    for (auto& v : data) v = r.real_at_width(width);
    ckpt.params.emplace_back(std::move(name),
                             Tensor::from_data(std::move(shape), std::move(data), true));
  }
  if (r.pos() != buf.size() - 8) {
    throw ValidationError("checkpoint '" + path + "' has trailing bytes");
  }
  return ckpt;
}

uint64_t checkpoint_file_hash(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < 8) throw ValidationError("checkpoint '" + path + "' is truncated");
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<uint64_t>(static_cast<uint8_t>(buf[buf.size() - 8 + i])) << (8 * i);
  }
  return stored;
}

}  // namespace scenediff
