#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include "json.hpp"
#include "mexa/errors.hpp"
#include "mexa/trainer.hpp"

namespace mexa::train {
namespace {

constexpr char kMagic[8] = {'M', 'E', 'X', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw DataError(path_ + ": truncated checkpoint");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) throw DataError(path_ + ": corrupt checkpoint (string length)");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw DataError(path_ + ": truncated checkpoint");
    return s;
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const RunConfig& config,
                     const std::string& rng_state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path);
  Writer w(out);
  out.write(kMagic, sizeof(kMagic));
  w.pod(kVersion);
  w.pod(config_hash(config));
  w.str(to_json(config).dump());
  w.pod<std::uint64_t>(params.dims.d_mol);
  w.pod<std::uint64_t>(params.dims.d_dis);
  w.pod<std::uint64_t>(params.dims.d_txt);
  w.str(rng_state);
  const ParamList list = params.parameters();
  w.pod<std::uint64_t>(list.size());
  for (const auto& p : list) {
    w.str(p.name());
    const Array& a = p.value();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(a.shape().size()));
    for (auto d : a.shape()) w.pod<std::uint64_t>(d);
    out.write(reinterpret_cast<const char*>(a.data().data()), static_cast<std::streamsize>(a.data().size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw DataError(path + ": not a checkpoint");
  Reader r(in, path);
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto hash = r.pod<std::uint64_t>();
  const RunConfig config = from_json(nlohmann::json::parse(r.str()));
  if (config_hash(config) != hash) throw DataError(path + ": config hash mismatch");
  model::InputDims dims;
  dims.d_mol = r.pod<std::uint64_t>();
  dims.d_dis = r.pod<std::uint64_t>();
  dims.d_txt = r.pod<std::uint64_t>();
  std::string rng_state = r.str();

  ModelParams params = ModelParams::create(dims, config);
  std::unordered_map<std::string, ad::Tensor> by_name;
  for (auto& p : params.parameters()) by_name.emplace(p.name(), p);
  const auto count = r.pod<std::uint64_t>();
  if (count != by_name.size()) throw DataError(path + ": parameter count does not match the configured model");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError(path + ": unknown parameter " + name);
    Shape shape(r.pod<std::uint32_t>());
    for (auto& d : shape) d = r.pod<std::uint64_t>();
    Array& a = it->second.mutable_value();
    if (shape != a.shape()) {
      throw DataError(path + ": shape mismatch for " + name + ": " + shape_string(shape) + " vs " + shape_string(a.shape()));
    }
    in.read(reinterpret_cast<char*>(a.data().data()), static_cast<std::streamsize>(a.data().size() * sizeof(double)));
    if (!in) throw DataError(path + ": truncated checkpoint");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path + ": trailing bytes in checkpoint");
  return Checkpoint{config, dims, std::move(rng_state), std::move(params)};
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

}  // namespace mexa::train
