#include "nnmd/structure.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace nnmd {

void SystemState::validate(int ntypes) const {
  if (types.size() != positions.size())
    throw Error(ErrorKind::Dimension, "types and positions differ in length");
  if (!velocities.empty() && velocities.size() != positions.size())
    throw Error(ErrorKind::Dimension, "velocities and positions differ in length");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (types[i] < 0 || types[i] >= ntypes)
      throw Error(ErrorKind::InvalidInput, "atom " + std::to_string(i) + " has type " +
                                               std::to_string(types[i]) + " outside [0, " +
                                               std::to_string(ntypes) + ")");
    for (int d = 0; d < 3; ++d)
      if (!std::isfinite(positions[i][d]))
        throw Error(ErrorKind::InvalidInput, "atom " + std::to_string(i) + " has a non-finite position");
  }
}

SystemState fcc_lattice(double a, Int3 cells) {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidInput, "lattice constant must be positive");
  if (cells[0] < 1 || cells[1] < 1 || cells[2] < 1)
    throw Error(ErrorKind::InvalidInput, "lattice cell counts must be >= 1");
  static constexpr double kBasis[4][3] = {{0, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}, {0, 0.5, 0.5}};
  SystemState s;
  s.box = SimBox({a * cells[0], a * cells[1], a * cells[2]});
  for (int k = 0; k < cells[2]; ++k)
    for (int j = 0; j < cells[1]; ++j)
      for (int i = 0; i < cells[0]; ++i)
        for (const auto& b : kBasis) {
          s.positions.push_back({a * (i + b[0]), a * (j + b[1]), a * (k + b[2])});
          s.types.push_back(0);
        }
  s.velocities.assign(s.positions.size(), {0, 0, 0});
  return s;
}

SystemState water_lattice(double spacing, Int3 cells) {
  if (!(spacing > 2.0)) throw Error(ErrorKind::InvalidInput, "water lattice spacing must exceed 2 A");
  if (cells[0] < 1 || cells[1] < 1 || cells[2] < 1)
    throw Error(ErrorKind::InvalidInput, "lattice cell counts must be >= 1");
  constexpr double kBond = 0.9572;
  const double half = 0.5 * 104.52 * M_PI / 180.0;
  const Vec3 h1{kBond * std::sin(half), kBond * std::cos(half), 0.0};
  const Vec3 h2{-kBond * std::sin(half), kBond * std::cos(half), 0.0};
  SystemState s;
  s.box = SimBox({spacing * cells[0], spacing * cells[1], spacing * cells[2]});
  for (int k = 0; k < cells[2]; ++k)
    for (int j = 0; j < cells[1]; ++j)
      for (int i = 0; i < cells[0]; ++i) {
        const Vec3 o{spacing * (i + 0.5), spacing * (j + 0.25), spacing * (k + 0.5)};
        s.positions.push_back(o);
        s.types.push_back(0);
        s.positions.push_back(s.box.wrap(o + h1));
        s.types.push_back(1);
        s.positions.push_back(s.box.wrap(o + h2));
        s.types.push_back(1);
      }
  s.velocities.assign(s.positions.size(), {0, 0, 0});
  return s;
}

namespace {

double min_image(double d, double l) { return d - l * std::nearbyint(d / l); }

}  // namespace

SystemState random_system(const SimBox& box, int natoms, int ntypes, double min_separation,
                          std::uint64_t seed) {
  if (natoms < 0) throw Error(ErrorKind::InvalidInput, "atom count must be >= 0");
  if (ntypes < 1) throw Error(ErrorKind::InvalidInput, "ntypes must be >= 1");
  if (min_separation < 0.0) throw Error(ErrorKind::InvalidInput, "minimum separation must be >= 0");
  Rng rng(seed);
  SystemState s;
  s.box = box;
  Int3 nc;
  for (int d = 0; d < 3; ++d)
    nc[d] = min_separation > 0.0
                ? std::max(1, static_cast<int>(std::floor(box.length(d) / min_separation)))
                : 1;
  std::vector<std::vector<int>> cells(static_cast<std::size_t>(product(nc)));
  auto cell_coord = [&](const Vec3& x) {
    Int3 c;
    for (int d = 0; d < 3; ++d)
      c[d] = std::min(nc[d] - 1, static_cast<int>(x[d] / box.length(d) * nc[d]));
    return c;
  };
  auto cell_id = [&](Int3 c) {
    for (int d = 0; d < 3; ++d) c[d] = ((c[d] % nc[d]) + nc[d]) % nc[d];
    return c[0] + nc[0] * (c[1] + nc[1] * c[2]);
  };
  const double min2 = min_separation * min_separation;
  const long max_attempts = 1000L * std::max(natoms, 1);
  long attempts = 0;
  while (static_cast<int>(s.positions.size()) < natoms) {
    if (++attempts > max_attempts)
      throw Error(ErrorKind::InvalidInput, "could not place " + std::to_string(natoms) +
                                               " atoms with minimum separation " +
                                               std::to_string(min_separation));
    const Vec3 x{rng.uniform() * box.length(0), rng.uniform() * box.length(1),
                 rng.uniform() * box.length(2)};
    bool ok = true;
    if (min_separation > 0.0) {
      const Int3 c = cell_coord(x);
      std::vector<int> seen;
      for (int dz = -1; dz <= 1 && ok; ++dz)
        for (int dy = -1; dy <= 1 && ok; ++dy)
          for (int dx = -1; dx <= 1 && ok; ++dx) {
            const int id = cell_id({c[0] + dx, c[1] + dy, c[2] + dz});
            if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
            seen.push_back(id);
            for (int j : cells[id]) {
              double r2 = 0.0;
              for (int d = 0; d < 3; ++d) {
                const double dd = min_image(x[d] - s.positions[j][d], box.length(d));
                r2 += dd * dd;
              }
              if (r2 < min2) {
                ok = false;
                break;
              }
            }
          }
    }
    if (!ok) continue;
    const int idx = static_cast<int>(s.positions.size());
    cells[static_cast<std::size_t>(cell_id(cell_coord(x)))].push_back(idx);
    s.positions.push_back(x);
    s.types.push_back(idx % ntypes);
  }
  s.velocities.assign(s.positions.size(), {0, 0, 0});
  return s;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  spare_ = rad * std::sin(2.0 * M_PI * u2);
  has_spare_ = true;
  return rad * std::cos(2.0 * M_PI * u2);
}

void maxwell_boltzmann(SystemState& state, std::span<const double> masses, double temperature,
                       std::uint64_t seed) {
  if (temperature < 0.0) throw Error(ErrorKind::InvalidInput, "temperature must be >= 0");
  Rng rng(seed);
  const std::size_t n = state.size();
  state.velocities.assign(n, {0, 0, 0});
  if (n == 0) return;
  Vec3 p{0, 0, 0};
  double mtot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int t = state.types[i];
    if (t < 0 || static_cast<std::size_t>(t) >= masses.size())
      throw Error(ErrorKind::InvalidInput, "no mass for type " + std::to_string(t));
    const double m = masses[t];
    const double sigma = std::sqrt(units::kB * temperature / (m * units::mvv2e));
    for (int d = 0; d < 3; ++d) state.velocities[i][d] = sigma * rng.normal();
    p += m * state.velocities[i];
    mtot += m;
  }
  const Vec3 vcm = (1.0 / mtot) * p;
  for (auto& v : state.velocities) v = v - vcm;
}

// ---------------------------------------------------------------------------
// Extended XYZ

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void xyz_error(long line, const std::string& msg) {
  throw Error(ErrorKind::Parse, "xyz line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& tok, long line) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    xyz_error(line, "invalid number '" + tok + "'");
  return v;
}

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

}  // namespace

void write_xyz(std::ostream& out, const SystemState& state,
               std::span<const std::string> type_names, const std::string& extra) {
  const bool vel = state.velocities.size() == state.size() && !state.velocities.empty();
  const Vec3& l = state.box.lengths();
  out << state.size() << '\n';
  out << "Lattice=\"" << fmt(l[0]) << " 0 0 0 " << fmt(l[1]) << " 0 0 0 " << fmt(l[2])
      << "\" Properties=species:S:1:pos:R:3" << (vel ? ":vel:R:3" : "");
  if (!extra.empty()) out << ' ' << extra;
  out << '\n';
  for (std::size_t i = 0; i < state.size(); ++i) {
    const int t = state.types[i];
    if (t < 0 || static_cast<std::size_t>(t) >= type_names.size())
      throw Error(ErrorKind::InvalidInput, "no element name for type " + std::to_string(t));
    out << type_names[t];
    for (int d = 0; d < 3; ++d) out << ' ' << fmt(state.positions[i][d]);
    if (vel)
      for (int d = 0; d < 3; ++d) out << ' ' << fmt(state.velocities[i][d]);
    out << '\n';
  }
}

namespace {

bool read_frame(std::istream& in, std::span<const std::string> type_names, SystemState& state,
                long& lineno) {
  std::string line;
  // Skip blank lines between frames.
  while (true) {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  const auto head = tokens(line);
  long count = -1;
  if (head.size() != 1) xyz_error(lineno, "expected atom count");
  {
    auto res = std::from_chars(head[0].data(), head[0].data() + head[0].size(), count);
    if (res.ec != std::errc() || res.ptr != head[0].data() + head[0].size() || count < 0)
      xyz_error(lineno, "invalid atom count '" + head[0] + "'");
  }
  if (!std::getline(in, line)) xyz_error(lineno + 1, "missing comment line");
  ++lineno;
  Vec3 lengths{0, 0, 0};
  const auto lat = line.find("Lattice=\"");
  if (lat != std::string::npos) {
    const auto start = lat + 9;
    const auto end = line.find('"', start);
    if (end == std::string::npos) xyz_error(lineno, "unterminated Lattice string");
    const auto vals = tokens(line.substr(start, end - start));
    if (vals.size() != 9) xyz_error(lineno, "Lattice needs 9 values");
    double m[9];
    for (int k = 0; k < 9; ++k) m[k] = parse_double(vals[k], lineno);
    for (int k = 0; k < 9; ++k)
      if (k % 4 != 0 && m[k] != 0.0) xyz_error(lineno, "only orthogonal boxes are supported");
    lengths = {m[0], m[4], m[8]};
  } else {
    const auto vals = tokens(line);
    if (vals.size() < 3) xyz_error(lineno, "comment line must carry box lengths");
    for (int d = 0; d < 3; ++d) lengths[d] = parse_double(vals[d], lineno);
  }
  for (int d = 0; d < 3; ++d)
    if (!(lengths[d] > 0.0)) xyz_error(lineno, "box lengths must be positive");

  SystemState s;
  s.box = SimBox(lengths);
  int with_vel = -1;
  for (long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) xyz_error(lineno + 1, "unexpected end of frame");
    ++lineno;
    const auto tok = tokens(line);
    if (tok.size() != 4 && tok.size() != 7)
      xyz_error(lineno, "expected 'element x y z [vx vy vz]'");
    const int has_v = tok.size() == 7 ? 1 : 0;
    if (with_vel < 0) with_vel = has_v;
    if (with_vel != has_v) xyz_error(lineno, "velocity columns must be present on all lines or none");
    int t = -1;
    for (std::size_t k = 0; k < type_names.size(); ++k)
      if (type_names[k] == tok[0]) t = static_cast<int>(k);
    if (t < 0) xyz_error(lineno, "unknown element '" + tok[0] + "'");
    s.types.push_back(t);
    s.positions.push_back({parse_double(tok[1], lineno), parse_double(tok[2], lineno),
                           parse_double(tok[3], lineno)});
    if (has_v)
      s.velocities.push_back({parse_double(tok[4], lineno), parse_double(tok[5], lineno),
                              parse_double(tok[6], lineno)});
  }
  if (s.velocities.empty()) s.velocities.assign(s.positions.size(), {0, 0, 0});
  state = std::move(s);
  return true;
}

}  // namespace

bool read_xyz(std::istream& in, std::span<const std::string> type_names, SystemState& state) {
  long lineno = 0;
  return read_frame(in, type_names, state, lineno);
}

SystemState load_xyz(const std::string& path, std::span<const std::string> type_names) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  SystemState s;
  if (!read_xyz(in, type_names, s)) throw Error(ErrorKind::Parse, path + ": empty structure file");
  return s;
}

std::vector<SystemState> load_trajectory(const std::string& path,
                                         std::span<const std::string> type_names) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::vector<SystemState> frames;
  SystemState s;
  long lineno = 0;
  while (read_frame(in, type_names, s, lineno)) frames.push_back(s);
  if (frames.empty()) throw Error(ErrorKind::Parse, path + ": no frames");
  return frames;
}

}  // namespace nnmd
