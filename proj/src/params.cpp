#include "eend/params.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "eend/errors.hpp"

namespace eend {

namespace {

constexpr char kMagic[8] = {'E', 'E', 'N', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  std::uint32_t len = read_u32(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  return s;
}

}  // namespace

Value ParamStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw ConfigError("ParamStore: duplicate parameter " + name);
  Value v = Value::parameter(std::move(init), name);
  params_.emplace(name, v);
  return v;
}

Value ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : params_) const_cast<Value&>(v).zero_grad();
}

void ParamStore::save(const std::string& path,
                      const std::map<std::string, std::string>& meta) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_string(os, k);
    write_string(os, v);
  }
  write_u32(os, static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, value] : params_) {
    write_string(os, name);
    write_u32(os, static_cast<std::uint32_t>(value.rows()));
    write_u32(os, static_cast<std::uint32_t>(value.cols()));
    const auto& data = value.val().data();
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed while writing checkpoint: " + path);
}

ParamStore ParamStore::load(const std::string& path,
                            std::map<std::string, std::string>* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("not a checkpoint file: " + path);
  std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::uint32_t meta_count = read_u32(is);
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k = read_string(is);
    std::string v = read_string(is);
    if (meta) (*meta)[k] = v;
  }
  ParamStore store;
  std::uint32_t param_count = read_u32(is);
  for (std::uint32_t i = 0; i < param_count; ++i) {
    std::string name = read_string(is);
    std::uint32_t rows = read_u32(is);
    std::uint32_t cols = read_u32(is);
    Tensor t(rows, cols);
    is.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw IoError("truncated checkpoint: " + path);
    store.create(name, std::move(t));
  }
  return store;
}

Tensor init_linear(std::size_t fan_in, std::size_t rows, std::size_t cols, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace eend
