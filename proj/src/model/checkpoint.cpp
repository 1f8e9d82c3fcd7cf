#include "xnec/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "xnec/error.hpp"

namespace xnec::model {
namespace {

constexpr char kMagic[8] = {'X', 'N', 'E', 'C', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw Error(Errc::validation, "checkpoint is truncated");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 24)) throw Error(Errc::validation, "checkpoint string too long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  double f64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, NecessityModel& model) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out.write(kMagic, 8);
    put_u32(out, kCheckpointVersion);
    put_string(out, config_to_json(model.config()));
    const auto tensors = model.tensors();
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Parameter* p : tensors) {
      put_string(out, p->name);
      put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
      put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
      for (Eigen::Index i = 0; i < p->value.size(); ++i) put_f64(out, p->value.data()[i]);
    }
    if (!out) throw Error(Errc::io, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

NecessityModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "checkpoint not found: " + path.string());
  Reader r(in);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw Error(Errc::validation, "not a checkpoint: " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(Errc::version_mismatch, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                            std::to_string(kCheckpointVersion) + ")");
  }
  NecessityModel model(config_from_json(r.str()));
  std::map<std::string, Parameter*> slots;
  for (Parameter* p : model.tensors()) slots[p->name] = p;
  const std::uint32_t count = r.u32();
  if (count != slots.size()) throw Error(Errc::validation, "checkpoint tensor count does not match its config");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.str();
    const auto it = slots.find(name);
    if (it == slots.end()) throw Error(Errc::validation, "unexpected tensor '" + name + "' in checkpoint");
    Parameter& p = *it->second;
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (rows != p.value.rows() || cols != p.value.cols()) throw Error(Errc::validation, "shape mismatch for tensor '" + name + "'");
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = r.f64();
    slots.erase(it);
  }
  return model;
}

}  // namespace xnec::model
