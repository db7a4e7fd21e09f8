#include "nsvfp/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace nsvfp {

namespace {

constexpr int kVersion = 1;
constexpr const char* kFormat = "nsvfp-checkpoint";

void write_block(std::ofstream& out, const std::vector<cplx>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(cplx)));
}

void read_block(std::ifstream& in, std::vector<cplx>& v) {
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * sizeof(cplx)));
  if (in.gcount() != std::streamsize(v.size() * sizeof(cplx))) throw std::runtime_error("checkpoint: truncated data");
}

} // namespace

void save_checkpoint(const std::string& path, const FieldState& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  const nlohmann::json header = {
      {"format", kFormat},
      {"version", kVersion},
      {"grid", s.grid()},
      {"order", s.order()},
      {"time", s.time},
      {"endian", std::endian::native == std::endian::little ? "little" : "big"},
      {"fields", {"f", "rho", "u0", "u1", "u2", "theta"}},
      {"layout", "complex double; f index (point * coeffs + (a1 * (order + 1) + a2) * (order + 1) + a3); "
                 "point (i0 * grid + i1) * grid + i2"},
      {"basis", "orthonormal Hermite functions, psi_000 = sqrt(M), M standard Maxwellian"},
      {"fourier", "g(x) = sum_k g_k exp(i k.x) on [0, 2pi)^3"}};
  out << header.dump() << '\n';
  write_block(out, s.f);
  write_block(out, s.rho);
  for (const auto& u : s.u) write_block(out, u);
  write_block(out, s.theta);
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

FieldState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad header: ") + e.what());
  }
  if (h.value("format", "") != kFormat) throw std::runtime_error("checkpoint: not a checkpoint file");
  if (h.value("version", 0) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  const std::string native = std::endian::native == std::endian::little ? "little" : "big";
  if (h.value("endian", "") != native) throw std::runtime_error("checkpoint: byte order mismatch");
  FieldState s(h.at("grid").get<int>(), h.at("order").get<int>());
  s.time = h.at("time").get<double>();
  read_block(in, s.f);
  read_block(in, s.rho);
  for (auto& u : s.u) read_block(in, u);
  read_block(in, s.theta);
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing data");
  return s;
}

} // namespace nsvfp
