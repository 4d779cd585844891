#include "nnmd/config.hpp"

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace nnmd {

namespace {

using json = nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::Config, path + ": " + msg);
}

/// Typed, path-aware view of one JSON object that remembers which keys were
/// read so leftovers can be rejected.
class Section {
 public:
  Section(const json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_object()) config_error(path_, "expected an object");
  }

  bool has(const std::string& key) const { return node_ && node_->contains(key); }
  std::string path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(has(key) ? &node_->at(key) : nullptr, path(key));
  }

  double number(const std::string& key, double def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number()) config_error(path(key), "expected a number");
    return v->get<double>();
  }
  long integer(const std::string& key, long def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number_integer()) config_error(path(key), "expected an integer");
    return v->get<long>();
  }
  bool boolean(const std::string& key, bool def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_boolean()) config_error(path(key), "expected true or false");
    return v->get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_string()) config_error(path(key), "expected a string");
    return v->get<std::string>();
  }
  std::vector<int> ints(const std::string& key, const std::vector<int>& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) config_error(path(key), "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : *v) {
      if (!e.is_number_integer()) config_error(path(key), "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, const std::vector<double>& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) config_error(path(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) config_error(path(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) config_error(path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) config_error(path(key), "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  Int3 int3(const std::string& key, const Int3& def) {
    if (!has(key)) {
      used_.insert(key);
      return def;
    }
    const auto v = ints(key, {});
    if (v.size() != 3) config_error(path(key), "expected 3 integers");
    return {v[0], v[1], v[2]};
  }
  Vec3 vec3(const std::string& key, const Vec3& def) {
    if (!has(key)) {
      used_.insert(key);
      return def;
    }
    const auto v = numbers(key, {});
    if (v.size() != 3) config_error(path(key), "expected 3 numbers");
    return {v[0], v[1], v[2]};
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, _] : node_->items())
      if (!used_.count(key)) config_error(path(key), "unknown key");
  }

 private:
  const json* take(const std::string& key) {
    used_.insert(key);
    return has(key) ? &node_->at(key) : nullptr;
  }

  const json* node_;
  std::string path_;
  std::set<std::string> used_;
};

struct KindDefaults {
  std::vector<std::string> types;
  std::vector<double> masses;
  double rc;
  std::vector<int> sel;
  double dt;
};

KindDefaults defaults_for(const std::string& kind, std::size_t ntypes_hint) {
  if (kind == "water") return {{"O", "H"}, {15.999, 1.008}, 6.0, {92, 46}, 0.5};
  if (kind == "fcc") return {{"Cu"}, {63.546}, 8.0, {512}, 1.0};
  return {{}, {}, 6.0, std::vector<int>(ntypes_hint, 512), 1.0};
}

SimBox planned_box(const SystemSpec& s) {
  if (s.kind == "fcc")
    return SimBox({s.lattice_constant * s.cells[0], s.lattice_constant * s.cells[1],
                   s.lattice_constant * s.cells[2]});
  if (s.kind == "water")
    return SimBox({s.spacing * s.cells[0], s.spacing * s.cells[1], s.spacing * s.cells[2]});
  return SimBox(s.box);
}

}  // namespace

Config parse_config_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, origin + ": malformed JSON: " + e.what());
  }
  Section root(&doc, "");
  Config cfg;

  Section sys = root.child("system");
  SystemSpec& s = cfg.system;
  const bool has_structure = sys.has("structure");
  s.kind = sys.string("kind", has_structure ? "file" : "fcc");
  if (s.kind != "fcc" && s.kind != "water" && s.kind != "random" && s.kind != "file")
    config_error("system.kind", "must be one of fcc, water, random, file");
  s.structure = sys.string("structure", "");
  s.lattice_constant = sys.number("lattice_constant", s.lattice_constant);
  s.cells = sys.int3("cells", s.cells);
  s.spacing = sys.number("spacing", s.spacing);
  s.box = sys.vec3("box", s.box);
  s.natoms = static_cast<int>(sys.integer("natoms", s.natoms));
  s.min_separation = sys.number("min_separation", s.min_separation);
  s.seed = static_cast<std::uint64_t>(sys.integer("seed", static_cast<long>(s.seed)));
  const std::vector<std::string> user_types = sys.strings("types", {});
  const KindDefaults kd = defaults_for(s.kind, std::max<std::size_t>(user_types.size(), 1));
  s.types = user_types.empty() ? kd.types : user_types;
  s.masses = sys.numbers("masses", user_types.empty() ? kd.masses : std::vector<double>{});
  sys.finish();

  Section pot = root.child("potential");
  PotentialSpec& p = cfg.potential;
  p.cutoff.rc = pot.number("rc", kd.rc);
  p.cutoff.rcs = pot.number("rcs", p.cutoff.rcs);
  p.cutoff.skin = pot.number("skin", p.cutoff.skin);
  const std::vector<int> default_sel =
      user_types.empty() ? kd.sel : std::vector<int>(user_types.size(), 512);
  p.sel = pot.ints("sel", default_sel);
  p.dims.ntypes = static_cast<int>(s.types.size());
  p.dims.embed = pot.ints("embed", p.dims.embed);
  if (pot.has("m1")) {
    const long m1 = pot.integer("m1", 0);
    if (p.dims.embed.empty()) config_error("potential.embed", "must not be empty");
    p.dims.embed.back() = static_cast<int>(m1);
  } else {
    pot.integer("m1", 0);
  }
  p.dims.m2 = static_cast<int>(pot.integer("m2", p.dims.m2));
  p.dims.fit = pot.ints("fit", p.dims.fit);
  {
    const std::string prec = pot.string("precision", to_string(p.precision));
    try {
      p.precision = parse_precision(prec);
    } catch (const Error& e) {
      config_error("potential.precision", e.what());
    }
  }
  p.seed = static_cast<std::uint64_t>(pot.integer("seed", static_cast<long>(p.seed)));
  {
    const double n_pad = std::accumulate(p.sel.begin(), p.sel.end(), 0.0);
    p.input_scale = pot.number("input_scale", n_pad > 0.0 ? n_pad * n_pad / 4.0 : p.input_scale);
  }
  p.params_path = pot.string("params", "");
  pot.finish();

  Section topo = root.child("topology");
  cfg.topology.rank_grid = topo.int3("rank_grid", cfg.topology.rank_grid);
  cfg.topology.node_layout = topo.int3("node_layout", cfg.topology.node_layout);
  topo.finish();

  Section cm = root.child("costmodel");
  CostModel& c = cfg.costmodel;
  c.alpha_net = cm.number("alpha_net", c.alpha_net);
  c.beta_net = cm.number("beta_net", c.beta_net);
  c.alpha_noc = cm.number("alpha_noc", c.alpha_noc);
  c.beta_noc = cm.number("beta_noc", c.beta_noc);
  c.tni_per_node = static_cast<int>(cm.integer("tni_per_node", c.tni_per_node));
  c.comm_threads_per_leader =
      static_cast<int>(cm.integer("comm_threads_per_leader", c.comm_threads_per_leader));
  cm.finish();

  Section run = root.child("run");
  RunConfig& r = cfg.run;
  r.steps = run.integer("steps", r.steps);
  r.dt = run.number("dt", kd.dt);
  r.temperature = run.number("temperature", r.temperature);
  {
    const std::string scheme = run.string("scheme", to_string(r.scheme));
    try {
      r.scheme = parse_scheme(scheme);
    } catch (const Error& e) {
      config_error("run.scheme", e.what());
    }
  }
  r.leaders = static_cast<int>(run.integer("leaders", r.leaders));
  r.load_balance = run.boolean("load_balance", r.load_balance);
  p.cutoff.rebuild_every = static_cast<int>(run.integer("rebuild_every", p.cutoff.rebuild_every));
  r.thermo_every = static_cast<int>(run.integer("thermo_every", r.thermo_every));
  r.seed = static_cast<std::uint64_t>(run.integer("seed", static_cast<long>(r.seed)));
  r.precision = p.precision;
  r.masses = s.masses;
  cfg.output.thermo_csv = run.string("thermo_csv", "");
  cfg.output.metrics_csv = run.string("metrics_csv", "");
  cfg.output.trajectory = run.string("trajectory", "");
  cfg.output.trajectory_every =
      static_cast<int>(run.integer("trajectory_every", cfg.output.trajectory_every));
  run.finish();

  root.finish();
  validate_config(cfg);
  return cfg;
}

Config parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

void validate_config(const Config& cfg) {
  const SystemSpec& s = cfg.system;
  const PotentialSpec& p = cfg.potential;
  const RunConfig& r = cfg.run;

  if (s.types.empty()) config_error("system.types", "at least one type is required");
  for (std::size_t i = 0; i < s.types.size(); ++i)
    for (std::size_t j = i + 1; j < s.types.size(); ++j)
      if (s.types[i] == s.types[j]) config_error("system.types", "duplicate type " + s.types[i]);
  if (s.masses.size() != s.types.size())
    config_error("system.masses", "needs one mass per type");
  for (double m : s.masses)
    if (!(m > 0.0)) config_error("system.masses", "masses must be > 0");
  if (s.kind == "file" && s.structure.empty())
    config_error("system.structure", "required when system.kind is file");
  if (s.kind == "fcc" && !(s.lattice_constant > 0.0))
    config_error("system.lattice_constant", "must be > 0");
  if (s.kind == "water" && !(s.spacing > 2.0)) config_error("system.spacing", "must be > 2");
  if ((s.kind == "fcc" || s.kind == "water") && (s.cells[0] < 1 || s.cells[1] < 1 || s.cells[2] < 1))
    config_error("system.cells", "entries must be >= 1");
  if (s.kind == "random") {
    for (double l : s.box)
      if (!(l > 0.0)) config_error("system.box", "entries must be > 0");
    if (s.natoms < 0) config_error("system.natoms", "must be >= 0");
    if (s.min_separation < 0.0) config_error("system.min_separation", "must be >= 0");
  }

  if (!(p.cutoff.rc > 0.0)) config_error("potential.rc", "must be > 0");
  if (!(p.cutoff.rcs > 0.0 && p.cutoff.rcs < p.cutoff.rc))
    config_error("potential.rcs", "must satisfy 0 < rcs < rc");
  if (!(p.cutoff.skin >= 0.0)) config_error("potential.skin", "must be >= 0");
  if (p.cutoff.rebuild_every < 1) config_error("run.rebuild_every", "must be >= 1");
  if (p.sel.size() != s.types.size()) config_error("potential.sel", "needs one entry per type");
  for (int v : p.sel)
    if (v < 1) config_error("potential.sel", "entries must be >= 1");
  if (p.dims.embed.empty()) config_error("potential.embed", "must not be empty");
  for (int w : p.dims.embed)
    if (w < 1) config_error("potential.embed", "widths must be >= 1");
  if (p.dims.m2 < 1 || p.dims.m2 > p.dims.m1())
    config_error("potential.m2", "must satisfy 1 <= m2 <= m1");
  if (p.dims.fit.empty()) config_error("potential.fit", "must not be empty");
  for (int w : p.dims.fit)
    if (w < 1) config_error("potential.fit", "widths must be >= 1");
  if (!(p.input_scale > 0.0)) config_error("potential.input_scale", "must be > 0");

  for (int d = 0; d < 3; ++d) {
    if (cfg.topology.rank_grid[d] < 1) config_error("topology.rank_grid", "entries must be >= 1");
    if (cfg.topology.node_layout[d] < 1)
      config_error("topology.node_layout", "entries must be >= 1");
    if (cfg.topology.rank_grid[d] % cfg.topology.node_layout[d] != 0)
      config_error("topology.node_layout", "must divide topology.rank_grid componentwise");
  }

  const CostModel& c = cfg.costmodel;
  if (c.alpha_net < 0) config_error("costmodel.alpha_net", "must be >= 0");
  if (c.beta_net < 0) config_error("costmodel.beta_net", "must be >= 0");
  if (c.alpha_noc < 0) config_error("costmodel.alpha_noc", "must be >= 0");
  if (c.beta_noc < 0) config_error("costmodel.beta_noc", "must be >= 0");
  if (c.tni_per_node < 1) config_error("costmodel.tni_per_node", "must be >= 1");
  if (c.comm_threads_per_leader < 1)
    config_error("costmodel.comm_threads_per_leader", "must be >= 1");

  if (r.steps < 0) config_error("run.steps", "must be >= 0");
  if (!(r.dt > 0.0)) config_error("run.dt", "must be > 0");
  if (r.temperature < 0.0) config_error("run.temperature", "must be >= 0");
  if (r.leaders != 1 && r.leaders != 2 && r.leaders != 4)
    config_error("run.leaders", "must be 1, 2 or 4");
  if (r.load_balance && r.scheme != Scheme::NodeBased)
    config_error("run.load_balance", "requires run.scheme node-based");
  if (r.thermo_every < 1) config_error("run.thermo_every", "must be >= 1");
  if (cfg.output.trajectory_every < 1) config_error("run.trajectory_every", "must be >= 1");

  const RankTopology topo = cfg.topo();
  if (r.scheme == Scheme::NodeBased && topo.ranks_per_node() != 4)
    config_error("topology.node_layout", "node-based scheme needs 4 ranks per node");
  if (s.kind != "file") {
    try {
      plan_exchange(r.scheme, topo, planned_box(s), p.cutoff.list_radius(), r.leaders,
                    r.load_balance);
    } catch (const Error& e) {
      config_error("topology.rank_grid", e.what());
    }
  }
}

SystemState build_system(const Config& cfg) {
  const SystemSpec& s = cfg.system;
  SystemState st;
  if (s.kind == "fcc") {
    st = fcc_lattice(s.lattice_constant, s.cells);
  } else if (s.kind == "water") {
    st = water_lattice(s.spacing, s.cells);
  } else if (s.kind == "random") {
    st = random_system(SimBox(s.box), s.natoms, static_cast<int>(s.types.size()),
                       s.min_separation, s.seed);
  } else {
    st = load_xyz(s.structure, s.types);
  }
  st.validate(static_cast<int>(s.types.size()));
  bool moving = false;
  for (const auto& v : st.velocities)
    if (v[0] != 0.0 || v[1] != 0.0 || v[2] != 0.0) moving = true;
  if (!moving) maxwell_boltzmann(st, s.masses, cfg.run.temperature, cfg.run.seed);
  return st;
}

ModelParams build_params(const Config& cfg) {
  const PotentialSpec& p = cfg.potential;
  ModelParams params;
  if (!p.params_path.empty()) {
    params = load_params(p.params_path);
    if (params.dims.ntypes != p.dims.ntypes)
      throw Error(ErrorKind::Config, "potential.params: file has " +
                                         std::to_string(params.dims.ntypes) +
                                         " types, system has " + std::to_string(p.dims.ntypes));
  } else {
    params = init_params(p.seed, p.dims, p.input_scale);
  }
  params.precision = p.precision;
  return params;
}

}  // namespace nnmd
