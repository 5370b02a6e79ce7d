#include "lcmae/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace lcmae {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'M', 'A', 'E', 'C', 'K', '1'};

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("tensor file: truncated header field");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw FormatError("tensor file: truncated header field");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f32_array(std::ostream& out, const float* p, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &p[i], 4);
    put_u32(out, bits);
  }
}

void get_f32_array(std::istream& in, float* p, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = get_u32(in);
    std::memcpy(&p[i], &bits, 4);
  }
}

}  // namespace

void save_tensor_file(const std::string& path, const TensorFile& tf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("tensor file: cannot write " + path);
  out.write(kMagic, 8);
  put_u64(out, tf.digest);
  put_u32(out, static_cast<uint32_t>(tf.tensors.size()));
  for (const auto& [key, mat] : tf.tensors) {  // std::map iterates sorted
    put_u32(out, static_cast<uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    put_u32(out, static_cast<uint32_t>(mat.rows));
    put_u32(out, static_cast<uint32_t>(mat.cols));
    put_f32_array(out, mat.d.data(), mat.d.size());
  }
  if (!out) throw FormatError("tensor file: write failed for " + path);
}

TensorFile load_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("tensor file: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw FormatError("tensor file: bad magic in " + path);
  TensorFile tf;
  tf.digest = get_u64(in);
  uint32_t n = get_u32(in);
  std::string prev;
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t klen = get_u32(in);
    std::string key(klen, '\0');
    in.read(key.data(), klen);
    if (!in) throw FormatError("tensor file: truncated key");
    if (i > 0 && !(prev < key))
      throw FormatError("tensor file: keys not sorted at '" + key + "'");
    prev = key;
    uint32_t rows = get_u32(in);
    uint32_t cols = get_u32(in);
    if (rows == 0 || cols == 0 || static_cast<uint64_t>(rows) * cols > (1u << 28))
      throw FormatError("tensor file: implausible shape for '" + key + "'");
    Mat<float> m(static_cast<int>(rows), static_cast<int>(cols));
    get_f32_array(in, m.d.data(), m.d.size());
    if (!in) throw FormatError("tensor file: truncated payload for '" + key + "'");
    tf.tensors.emplace(key, std::move(m));
  }
  char extra;
  if (in.read(&extra, 1)) throw FormatError("tensor file: trailing bytes in " + path);
  return tf;
}

void save_checkpoint(const std::string& path, const ParamStore<float>& ps,
                     uint64_t digest) {
  TensorFile tf;
  tf.digest = digest;
  for (const auto& [key, var] : ps) tf.tensors.emplace(key, var->val);
  save_tensor_file(path, tf);
}

void load_checkpoint(const std::string& path, ParamStore<float>& ps, uint64_t digest) {
  TensorFile tf = load_tensor_file(path);
  if (tf.digest != digest)
    throw DataError("checkpoint: config digest mismatch in " + path);
  if (tf.tensors.size() != ps.size())
    throw DataError("checkpoint: parameter count mismatch in " + path);
  for (auto& [key, var] : ps) {
    auto it = tf.tensors.find(key);
    if (it == tf.tensors.end())
      throw DataError("checkpoint: missing parameter '" + key + "'");
    if (it->second.rows != var->val.rows || it->second.cols != var->val.cols)
      throw DataError("checkpoint: shape mismatch for '" + key + "'");
    var->val = it->second;
  }
}

}  // namespace lcmae
