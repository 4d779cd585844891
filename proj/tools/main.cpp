#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nnmd/commbench.hpp"
#include "nnmd/config.hpp"
#include "validation.hpp"

namespace {

using namespace nnmd;

enum Exit : int { kOk = 0, kRuntime = 1, kUsage = 2, kConfigError = 3, kValidationFailed = 4 };

/// Error raised while turning a config into a runnable system.
struct ConfigFailure {
  Error error;
};

std::string kind_tag(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    default: return "invalid";
  }
}

int report(const std::string& tag, const std::string& message, int code) {
  std::cerr << "error[" << tag << "]: " << message << '\n';
  return code;
}

Config load_config(const std::string& path) {
  try {
    return parse_config(path);
  } catch (const Error& e) {
    throw ConfigFailure{e};
  }
}

/// Output stream to a path, or stdout for "" and "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error(ErrorKind::Io, "cannot open output file " + path);
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }
  bool is_stdout() const { return !file_; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct RunOverrides {
  std::optional<std::string> scheme;
  std::optional<int> leaders;
  std::optional<bool> load_balance;
  std::optional<long> steps;
  std::optional<std::string> precision;
  std::optional<std::string> thermo, metrics, trajectory;
};

void apply(Config& cfg, const RunOverrides& o) {
  try {
    if (o.scheme) cfg.run.scheme = parse_scheme(*o.scheme);
    if (o.precision) {
      cfg.potential.precision = parse_precision(*o.precision);
      cfg.run.precision = cfg.potential.precision;
    }
  } catch (const Error& e) {
    throw ConfigFailure{Error(ErrorKind::Config, e.what())};
  }
  if (o.leaders) cfg.run.leaders = *o.leaders;
  if (o.load_balance) cfg.run.load_balance = *o.load_balance;
  if (o.steps) cfg.run.steps = *o.steps;
  if (o.thermo) cfg.output.thermo_csv = *o.thermo;
  if (o.metrics) cfg.output.metrics_csv = *o.metrics;
  if (o.trajectory) cfg.output.trajectory = *o.trajectory;
  try {
    validate_config(cfg);
  } catch (const Error& e) {
    throw ConfigFailure{e};
  }
}

void write_metrics(std::ostream& out, const Simulation& sim, long steps) {
  const SimMetrics& m = sim.cluster().metrics();
  std::vector<double> counts;
  for (int c : sim.evaluated_counts()) counts.push_back(c);
  const SeriesStats st = series_stats(counts);
  const auto regions = register_regions(sim.cluster(), RegistrationPolicy::PerNeighbor,
                                        sim.exchange().plan().messages_per_rank(
                                            sim.cluster().topology()));
  out << "scheme,leaders,load_balance,steps,rebuilds,messages_sent,messages_received,"
         "intra_node_copies,bytes_sent,bytes_received,copy_bytes,registered_regions,"
         "virtual_time_us,atoms_min,atoms_avg,atoms_max,atoms_sdmr\n";
  out << to_string(sim.config().scheme) << ',' << sim.config().leaders << ','
      << (sim.config().load_balance ? 1 : 0) << ',' << steps << ',' << sim.rebuild_events()
      << ',' << m.messages_sent << ',' << m.messages_received << ',' << m.intra_node_copies
      << ',' << m.bytes_sent << ',' << m.bytes_received << ',' << m.copy_bytes << ','
      << *std::max_element(regions.begin(), regions.end()) << ',' << m.virtual_time_us << ',' << st.min << ',' << st.avg
      << ',' << st.max << ',' << st.sdmr << '\n';
}

int cmd_run(const std::string& path, const RunOverrides& overrides) {
  Config cfg = load_config(path);
  apply(cfg, overrides);
  std::optional<Simulation> sim;
  try {
    sim.emplace(build_system(cfg), DeepPotential(build_params(cfg), cfg.potential.cutoff),
                cfg.potential.sel, cfg.run, cfg.topo(), cfg.costmodel);
  } catch (const Error& e) {
    throw ConfigFailure{e};
  }

  Sink thermo(cfg.output.thermo_csv);
  std::optional<Sink> traj;
  if (!cfg.output.trajectory.empty()) traj.emplace(cfg.output.trajectory);
  auto frame = [&] {
    if (!traj) return;
    std::ostringstream extra;
    extra << "step=" << sim->current_step();
    write_xyz(traj->get(), sim->state(), cfg.system.types, extra.str());
  };

  write_thermo_header(thermo.get());
  write_thermo_row(thermo.get(), sim->thermo());
  frame();
  for (long s = 1; s <= cfg.run.steps; ++s) {
    sim->step();
    if (s % cfg.run.thermo_every == 0 || s == cfg.run.steps)
      write_thermo_row(thermo.get(), sim->thermo());
    if (s % cfg.output.trajectory_every == 0) frame();
  }

  if (cfg.output.metrics_csv.empty()) {
    if (!thermo.is_stdout()) write_metrics(std::cout, *sim, cfg.run.steps);
    else {
      std::cout << '\n';
      write_metrics(std::cout, *sim, cfg.run.steps);
    }
  } else {
    Sink metrics(cfg.output.metrics_csv);
    write_metrics(metrics.get(), *sim, cfg.run.steps);
  }
  return kOk;
}

int cmd_bench(const std::string& path, const std::string& registration,
              const std::string& output) {
  Config cfg = load_config(path);
  CommBenchOptions o;
  o.rank_grid = cfg.topology.rank_grid;
  o.node_layout = cfg.topology.node_layout;
  o.ghost_cutoff = cfg.potential.cutoff.list_radius();
  o.leaders = cfg.run.leaders;
  o.cost = cfg.costmodel;
  o.seed = cfg.system.seed;
  try {
    const SystemState sys = build_system(cfg);
    o.density = static_cast<double>(sys.size()) / sys.box.volume();
  } catch (const Error& e) {
    throw ConfigFailure{e};
  }
  o.registration =
      registration == "pooled" ? RegistrationPolicy::Pooled : RegistrationPolicy::PerNeighbor;
  if (cfg.topo().ranks_per_node() != 4) o.schemes = {Scheme::ThreeStage, Scheme::P2P};
  const auto rows = run_comm_bench(o, default_bench_cases());
  Sink out(output);
  write_comm_bench_csv(out.get(), rows);
  return kOk;
}

int cmd_ghost_model(double a, double r) {
  const GhostCounts c = ghost_count_model(a, r);
  std::cout << "nghost_bs," << c.nghost_bs << '\n'
            << "nghost_lb," << c.nghost_lb << '\n';
  std::ostringstream ratio;
  ratio.setf(std::ios::fixed);
  ratio.precision(2);
  ratio << c.ratio();
  std::cout << "ratio," << ratio.str() << '\n';
  return kOk;
}

int cmd_validate(const std::string& path) {
  const Config cfg = load_config(path);
  std::vector<tools::SuiteResult> results;
  try {
    results = tools::run_validation(cfg);
  } catch (const Error& e) {
    throw ConfigFailure{e};
  }
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? kOk : kValidationFailed;
}

int cmd_rdf(const std::string& path, double rmax, int bins, const std::string& types,
            const std::string& pair, const std::string& output) {
  std::vector<std::string> names;
  {
    std::stringstream ss(types);
    for (std::string t; std::getline(ss, t, ',');)
      if (!t.empty()) names.push_back(t);
  }
  int ta = -1, tb = -1;
  if (!pair.empty()) {
    const auto dash = pair.find('-');
    if (dash == std::string::npos)
      throw Error(ErrorKind::InvalidInput, "--pair expects A-B, got '" + pair + "'");
    auto index = [&](const std::string& n) {
      for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == n) return static_cast<int>(k);
      throw Error(ErrorKind::InvalidInput, "--pair names unknown type '" + n + "'");
    };
    ta = index(pair.substr(0, dash));
    tb = index(pair.substr(dash + 1));
  }
  const auto frames = load_trajectory(path, names);
  if (frames.empty()) throw Error(ErrorKind::Parse, path + ": no frames");
  RdfAccumulator acc(rmax, bins);
  for (const auto& f : frames) acc.add(f.positions, f.box, f.types, ta, tb);
  const Rdf g = acc.result();
  Sink out(output);
  out.get() << "r,g\n";
  for (std::size_t i = 0; i < g.r.size(); ++i) out.get() << g.r[i] << ',' << g.g[i] << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nnmd: decomposed neural-network MD on a virtual cluster"};
  app.require_subcommand(1);

  std::string config;
  RunOverrides ov;
  auto* run = app.add_subcommand("run", "Run NVE molecular dynamics; writes thermo and metrics CSV");
  run->add_option("config", config, "JSON config")->required();
  run->add_option("--scheme", ov.scheme, "three-stage | p2p | node-based");
  run->add_option("--leaders", ov.leaders, "Leaders per node (1, 2 or 4)");
  run->add_option("--load-balance", ov.load_balance, "Intra-node load balance (true/false)");
  run->add_option("--steps", ov.steps, "Number of steps");
  run->add_option("--precision", ov.precision, "double | mix-fp32 | mix-fp16");
  run->add_option("--thermo", ov.thermo, "Thermo CSV path ('-' for stdout)");
  run->add_option("--metrics", ov.metrics, "Metrics CSV path");
  run->add_option("--trajectory", ov.trajectory, "Extended-XYZ trajectory path");

  std::string registration = "per-neighbor", bench_out;
  auto* bench = app.add_subcommand("bench-comm", "One exchange per scheme and sub-box size");
  bench->add_option("config", config, "JSON config")->required();
  bench->add_option("--registration", registration, "per-neighbor | pooled")
      ->check(CLI::IsMember({"per-neighbor", "pooled"}));
  bench->add_option("-o,--output", bench_out, "CSV path (default stdout)");

  double a = 1.0, r = 2.0;
  auto* gm = app.add_subcommand("ghost-model", "Ghost counts of the density-1 cube model");
  gm->add_option("--a", a, "Sub-box side")->required()->check(CLI::PositiveNumber);
  gm->add_option("--r", r, "Cutoff")->required()->check(CLI::NonNegativeNumber);

  auto* val = app.add_subcommand("validate", "Run the oracle suites for a config");
  val->add_option("config", config, "JSON config")->required();

  std::string traj, types = "Cu,O,H", pair, rdf_out;
  double rmax = 6.0;
  int bins = 120;
  auto* rd = app.add_subcommand("rdf", "g(r) CSV from an extended-XYZ trajectory");
  rd->add_option("trajectory", traj, "Extended-XYZ file")->required();
  rd->add_option("--rmax", rmax, "Largest distance")->required()->check(CLI::PositiveNumber);
  rd->add_option("--bins", bins, "Histogram bins")->required()->check(CLI::PositiveNumber);
  rd->add_option("--types", types, "Comma-separated element names, in type order");
  rd->add_option("--pair", pair, "Restrict to pairs A-B");
  rd->add_option("-o,--output", rdf_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*run) return cmd_run(config, ov);
    if (*bench) return cmd_bench(config, registration, bench_out);
    if (*gm) return cmd_ghost_model(a, r);
    if (*val) return cmd_validate(config);
    if (*rd) return cmd_rdf(traj, rmax, bins, types, pair, rdf_out);
  } catch (const ConfigFailure& f) {
    return report("config." + kind_tag(f.error.kind()), f.error.what(), kConfigError);
  } catch (const Error& e) {
    return report(std::string("runtime.") + to_string(e.kind()), e.what(), kRuntime);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), kRuntime);
  }
  return kUsage;
}
