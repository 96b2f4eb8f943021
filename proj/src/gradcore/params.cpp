#include "xferlab/gradcore/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "xferlab/error.hpp"
#include "xferlab/gradcore/ops.hpp"

namespace xferlab::grad {

namespace {

constexpr char kMagic[8] = {'X', 'F', 'E', 'R', 'L', 'A', 'B', '1'};
constexpr std::uint64_t kMaxNameLength = 4096;
constexpr std::uint64_t kMaxRank = 8;

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& os, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

class Reader {
 public:
  Reader(const std::filesystem::path& path, std::vector<unsigned char> bytes)
      : path_(path), bytes_(std::move(bytes)) {}

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(path_.string() + ": truncated " + what + " at offset " +
                        std::to_string(pos_));
    }
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32() {
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(u);
  }

  std::string str(std::size_t n) {
    need(n, "name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

Tensor init_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = static_cast<double>(static_cast<float>(dist(rng)));
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor squared_l2(const ParamList& params) {
  if (params.empty()) return Tensor::scalar(0.0);
  std::vector<Tensor> parts;
  parts.reserve(params.size());
  for (const auto& p : params) parts.push_back(sum(square(p.tensor)));
  Tensor total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  return total;
}

void save_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(path.string() + ": cannot open for writing");
  os.write(kMagic, sizeof kMagic);
  for (const auto& p : params) {
    put_u64(os, p.name.size());
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u64(os, p.tensor.rank());
    for (auto e : p.tensor.shape()) put_u64(os, e);
    for (double v : p.tensor.data()) put_f32(os, static_cast<float>(v));
  }
  if (!os) throw FormatError(path.string() + ": write failed");
}

ParamList load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path.string() + ": cannot open checkpoint");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  Reader r(path, std::move(bytes));
  r.need(sizeof kMagic, "magic");
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw FormatError(path.string() + ": bad magic at offset 0");
  }
  ParamList out;
  while (!r.done()) {
    const auto entry = r.offset();
    const auto name_len = r.u64("name length");
    if (name_len == 0 || name_len > kMaxNameLength) {
      throw FormatError(path.string() + ": bad name length at offset " + std::to_string(entry));
    }
    std::string name = r.str(name_len);
    const auto rank = r.u64("rank");
    if (rank == 0 || rank > kMaxRank) {
      throw FormatError(path.string() + ": bad rank for '" + name + "' at offset " +
                        std::to_string(entry));
    }
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) {
      const auto e = r.u64("extent");
      if (e == 0) throw FormatError(path.string() + ": zero extent for '" + name + "'");
      shape.push_back(e);
    }
    const auto n = shape_size(shape);
    r.need(n * 4, "payload");
    std::vector<double> values(n);
    for (auto& v : values) v = static_cast<double>(r.f32());
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values), true)});
  }
  return out;
}

void assign_params(ParamList& target, const ParamList& source) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& p : source) by_name[p.name] = &p.tensor;
  for (auto& p : target) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
    if (it->second->shape() != p.tensor.shape()) {
      throw DimensionError("parameter '" + p.name + "' has shape " + shape_str(p.tensor.shape()) +
                           " but checkpoint holds " + shape_str(it->second->shape()));
    }
    auto dst = p.tensor.mutable_data();
    auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  if (by_name.size() != target.size()) {
    throw FormatError("checkpoint holds " + std::to_string(by_name.size()) +
                      " parameters, model expects " + std::to_string(target.size()));
  }
}

}  // namespace xferlab::grad
