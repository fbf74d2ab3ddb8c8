#pragma once
#include <complex>
#include <string>
#include <vector>

#include "pfn/priors.hpp"

namespace pfn {

// Buses are 0-based in memory with bus 0 as the slack; network files use the
// conventional 1-based ids and are converted on load.
struct Line {
  int from = 0;
  int to = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
};

struct RadialNetwork {
  int bus_count = 0;
  double slack_v = 1.0;
  std::vector<Line> lines;
  std::vector<double> p_load;  // nominal p.u., slot 0 stays zero
  std::vector<double> q_load;
};

struct LoadScenario {
  std::vector<double> p;  // per bus, slot 0 ignored
  std::vector<double> q;
};

struct PFSolution {
  std::vector<std::complex<double>> v;
  double mismatch = 0.0;
  int iterations = 0;
  std::vector<double> mismatch_trace;  // max injection mismatch per sweep
};

// Tree rooted at the slack, positive impedances, nonnegative resistances.
void validate_network(const RadialNetwork& net);

LoadScenario nominal_scenario(const RadialNetwork& net);

// Backward/forward sweep: branch currents accumulate from the leaves, then
// voltages propagate from the slack. Convergence is measured against the
// full admittance-matrix injection equations, not the sweep update itself.
PFSolution solve(const RadialNetwork& net, const LoadScenario& scenario,
                 double tol = 1e-8, int max_iter = 100);

// N scenarios with every load drawn uniformly in nominal*(1 +- delta_pct/100).
// Inputs are the flattened loads (all P, then all Q, non-slack buses in id
// order), z-scored per column; the target is |V| at target_bus.
SyntheticDataset generate_pf_dataset(const RadialNetwork& net,
                                     double delta_pct, int64_t n,
                                     int target_bus, uint64_t seed);

// Text format: `slack_v,<value>` header, then one `from,to,r,x,P,Q` line per
// branch where P,Q is the nominal load at the `to` bus. `#` starts a comment.
RadialNetwork load_network_file(const std::string& path);
void write_network_file(const std::string& path, const RadialNetwork& net);

// Subfeeder induced by buses 0..bus_count-1 (keeps lines with both ends in
// range); used to cut the bundled 33-bus data down to desk scale.
RadialNetwork truncate_network(const RadialNetwork& net, int bus_count);

}  // namespace pfn
