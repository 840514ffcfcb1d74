#include <bit>
#include <cstring>
#include <fstream>

#include "cmt/error.hpp"
#include "cmt/model/transformer.hpp"

// Container layout (little-endian):
//   "CMTCKPT\0" | u32 version | u32 config_len | config JSON
//   u32 tensor_count | per tensor: u32 name_len, name, u32 rows, u32 cols, u64 float_offset
//   float32 payload
namespace cmt::model {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(const std::string& data) : data_(data) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::string bytes(std::size_t n) { return std::string(take(n), n); }
  const char* take(std::size_t n) {
    if (n > data_.size() - pos_) throw ParseError("truncated checkpoint", pos_);
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void Transformer::save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string cfg = config_to_json(config_);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params_.size()));
  std::uint64_t offset = 0;
  for (const auto& p : params_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    put<std::uint64_t>(out, offset);
    offset += static_cast<std::uint64_t>(p.value.size());
  }
  for (const auto& p : params_)
    for (long i = 0; i < p.value.size(); ++i) put<float>(out, static_cast<float>(p.value.data()[i]));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

Transformer Transformer::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint " + path.string());
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Cursor c(data);
  if (std::memcmp(c.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) throw ParseError("not a checkpoint file", 0);
  const auto version = c.get<std::uint32_t>();
  if (version != kVersion) throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = c.get<std::uint32_t>();
  Transformer model(config_from_json(c.bytes(cfg_len)), 0);

  struct Entry {
    std::string name;
    std::uint32_t rows, cols;
    std::uint64_t offset;
  };
  const auto count = c.get<std::uint32_t>();
  if (count != model.params_.size()) throw SchemaError("checkpoint tensor count does not match its config");
  std::vector<Entry> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = c.bytes(c.get<std::uint32_t>());
    e.rows = c.get<std::uint32_t>();
    e.cols = c.get<std::uint32_t>();
    e.offset = c.get<std::uint64_t>();
    index.push_back(std::move(e));
  }
  const std::size_t base = c.pos();
  for (const auto& e : index) {
    Param& p = model.param(e.name);
    if (p.value.rows() != e.rows || p.value.cols() != e.cols) throw SchemaError("shape mismatch for " + e.name);
    const std::size_t n = static_cast<std::size_t>(e.rows) * e.cols;
    if (e.offset > (data.size() - base) / sizeof(float) || n > (data.size() - base) / sizeof(float) - e.offset)
      throw ParseError("tensor " + e.name + " runs past end of checkpoint", base);
    const char* src = data.data() + base + e.offset * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, src + i * sizeof(float), sizeof(float));
      p.value.data()[i] = static_cast<double>(v);
    }
    p.reset_grad();
  }
  return model;
}

}  // namespace cmt::model
