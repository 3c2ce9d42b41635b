// SPDX-License-Identifier: Apache-2.0
#include "empgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace empgan {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what, pos_);
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors& tensors) {
  std::string out = "EMPG";
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) EMPGAN_THROW(ContractError, "tensor name too long: " << name.substr(0, 32) << "...");
    if (t.rank() > 0xFF) EMPGAN_THROW(ContractError, "tensor '" << name << "' has too many dimensions");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      if (d > 0xFFFFFFFFu) EMPGAN_THROW(ContractError, "tensor '" << name << "' dimension too large");
      put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    out.append(reinterpret_cast<const char*>(t.storage().data()), t.size() * sizeof(double));
  }
  return out;
}

NamedTensors decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != "EMPG") throw CheckpointError("bad magic bytes, not an EMPG checkpoint", 0);
  std::size_t at = r.pos();
  auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version), at);
  auto count = r.get<std::uint32_t>("tensor count");
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto len = r.get<std::uint16_t>("name length");
    std::string name(r.take(len, "tensor name"));
    auto rank = r.get<std::uint8_t>("rank");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      shape.push_back(r.get<std::uint32_t>("dimension"));
      numel *= shape.back();
    }
    at = r.pos();
    if (numel > (bytes.size() - at) / sizeof(double))
      throw CheckpointError("truncated checkpoint in values of '" + name + "'", at);
    auto raw = r.take(numel * sizeof(double), "values");
    std::vector<double> data(numel);
    std::memcpy(data.data(), raw.data(), raw.size());
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after the last tensor", r.pos());
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::string bytes = encode_checkpoint(tensors);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) EMPGAN_THROW(ContractError, "cannot write checkpoint " << tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) EMPGAN_THROW(ContractError, "short write to checkpoint " << tmp);
  }
  std::filesystem::rename(tmp, path);
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

Tensor text_tensor(std::string_view text) {
  std::vector<double> v;
  v.reserve(text.size());
  for (unsigned char c : text) v.push_back(static_cast<double>(c));
  return Tensor::vector(std::move(v));
}

std::string tensor_text(const Tensor& t) {
  std::string s;
  s.reserve(t.size());
  for (double v : t.storage()) s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return s;
}

}  // namespace empgan
