#include "nnmd/commbench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "nnmd/structure.hpp"

namespace nnmd {

std::vector<CommBenchCase> default_bench_cases() {
  return {{"1x1x1", {1.0, 1.0, 1.0}},
          {"0.5x0.5x1", {0.5, 0.5, 1.0}},
          {"0.5x0.5x0.5", {0.5, 0.5, 0.5}}};
}

std::vector<CommBenchRow> run_comm_bench(const CommBenchOptions& options,
                                         const std::vector<CommBenchCase>& cases) {
  if (!(options.ghost_cutoff > 0.0))
    throw Error(ErrorKind::InvalidInput, "ghost cutoff must be > 0");
  if (!(options.density > 0.0)) throw Error(ErrorKind::InvalidInput, "density must be > 0");
  options.cost.validate();
  const RankTopology topo(options.rank_grid, options.node_layout);

  std::vector<CommBenchRow> rows;
  for (const auto& c : cases) {
    Vec3 lengths;
    for (int d = 0; d < 3; ++d)
      lengths[d] = c.side_factors[d] * options.ghost_cutoff * options.rank_grid[d];
    const SimBox box(lengths);
    const int natoms = static_cast<int>(std::lround(options.density * box.volume()));
    const SystemState sys = random_system(box, natoms, 1, 0.0, options.seed);
    std::vector<int> gids(sys.size());
    std::iota(gids.begin(), gids.end(), 0);

    for (Scheme scheme : options.schemes) {
      const CommPlan plan =
          plan_exchange(scheme, topo, box, options.ghost_cutoff, options.leaders);
      auto stores = distribute(topo, box, gids, sys.types, sys.positions, sys.velocities);
      Cluster cluster(topo, options.cost);
      Exchange exchange(plan, topo, box);
      exchange.rebuild(stores, cluster);
      cluster.reset_metrics();

      SimMetrics m = exchange.forward(stores, cluster);
      ForceLedger ledger = make_ledger(stores);
      for (const auto& s : stores)
        for (int i = s.nlocal; i < s.size_view; ++i)
          ledger[s.rank][i].push_back({s.gid[i], i, {1.0, 0.0, 0.0}});
      m += exchange.reverse(stores, ledger, cluster);

      const auto per_rank = plan.messages_per_rank(topo);
      const auto regions = register_regions(cluster, options.registration, per_rank);

      CommBenchRow row;
      row.scheme = scheme;
      row.subbox_spec = c.label;
      row.rounds = plan.rounds();
      row.peer_count = plan.peers();
      row.messages_per_rank = plan.average_messages_per_rank(topo);
      row.bytes = m.bytes_sent;
      row.virtual_time_us = m.virtual_time_us;
      row.registered_regions = *std::max_element(regions.begin(), regions.end());
      row.atoms = sys.size();
      rows.push_back(row);
    }
  }
  return rows;
}

void write_comm_bench_csv(std::ostream& out, const std::vector<CommBenchRow>& rows) {
  out << "scheme,subbox_spec,rounds,peer_count,messages_per_rank,bytes,virtual_time_us,"
         "registered_regions\n";
  for (const auto& r : rows)
    out << to_string(r.scheme) << ',' << r.subbox_spec << ',' << r.rounds << ','
        << r.peer_count << ',' << r.messages_per_rank << ',' << r.bytes << ','
        << r.virtual_time_us << ',' << r.registered_regions << '\n';
}

}  // namespace nnmd
