#include "pfn/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfn/error.hpp"

namespace pfn {

namespace {

struct TreeOrder {
  std::vector<int> bfs;      // slack first
  std::vector<int> parent;   // -1 for slack
  std::vector<int> line_in;  // index of the line feeding each bus
};

TreeOrder order_from_slack(const RadialNetwork& net) {
  int n = net.bus_count;
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));
  for (size_t li = 0; li < net.lines.size(); ++li) {
    const Line& l = net.lines[li];
    adj[static_cast<size_t>(l.from)].push_back({l.to, static_cast<int>(li)});
    adj[static_cast<size_t>(l.to)].push_back({l.from, static_cast<int>(li)});
  }
  TreeOrder t;
  t.parent.assign(static_cast<size_t>(n), -2);
  t.line_in.assign(static_cast<size_t>(n), -1);
  t.parent[0] = -1;
  t.bfs.push_back(0);
  for (size_t head = 0; head < t.bfs.size(); ++head) {
    int u = t.bfs[head];
    for (auto [v, li] : adj[static_cast<size_t>(u)]) {
      if (v == t.parent[static_cast<size_t>(u)] &&
          li == t.line_in[static_cast<size_t>(u)])
        continue;
      if (t.parent[static_cast<size_t>(v)] != -2)
        throw TopologyError("network: cycle through bus " +
                            std::to_string(v + 1));
      t.parent[static_cast<size_t>(v)] = u;
      t.line_in[static_cast<size_t>(v)] = li;
      t.bfs.push_back(v);
    }
  }
  for (int b = 0; b < n; ++b)
    if (t.parent[static_cast<size_t>(b)] == -2)
      throw TopologyError("network: bus " + std::to_string(b + 1) +
                          " unreachable from the slack");
  return t;
}

std::vector<std::vector<std::complex<double>>> bus_admittance(
    const RadialNetwork& net) {
  size_t n = static_cast<size_t>(net.bus_count);
  std::vector<std::vector<std::complex<double>>> y(
      n, std::vector<std::complex<double>>(n, {0.0, 0.0}));
  for (const Line& l : net.lines) {
    std::complex<double> adm = 1.0 / std::complex<double>(l.r, l.x);
    size_t f = static_cast<size_t>(l.from), t = static_cast<size_t>(l.to);
    y[f][f] += adm;
    y[t][t] += adm;
    y[f][t] -= adm;
    y[t][f] -= adm;
  }
  return y;
}

// Max |P,Q| residual of the injection equations at the non-slack buses.
double injection_mismatch(
    const RadialNetwork& net, const LoadScenario& sc,
    const std::vector<std::vector<std::complex<double>>>& ybus,
    const std::vector<std::complex<double>>& v) {
  double worst = 0.0;
  for (int i = 1; i < net.bus_count; ++i) {
    std::complex<double> sum = 0.0;
    for (int j = 0; j < net.bus_count; ++j)
      sum += ybus[static_cast<size_t>(i)][static_cast<size_t>(j)] *
             v[static_cast<size_t>(j)];
    std::complex<double> calc = v[static_cast<size_t>(i)] * std::conj(sum);
    std::complex<double> spec(-sc.p[static_cast<size_t>(i)],
                              -sc.q[static_cast<size_t>(i)]);
    worst = std::max(worst, std::abs(calc.real() - spec.real()));
    worst = std::max(worst, std::abs(calc.imag() - spec.imag()));
  }
  return worst;
}

}  // namespace

void validate_network(const RadialNetwork& net) {
  if (net.bus_count < 2)
    throw TopologyError("network: needs a slack and at least one load bus");
  if (net.slack_v <= 0.0)
    throw TopologyError("network: slack voltage must be positive");
  if (net.lines.size() != static_cast<size_t>(net.bus_count - 1))
    throw TopologyError("network: a tree over " +
                        std::to_string(net.bus_count) + " buses needs " +
                        std::to_string(net.bus_count - 1) + " lines, got " +
                        std::to_string(net.lines.size()));
  if (net.p_load.size() != static_cast<size_t>(net.bus_count) ||
      net.q_load.size() != static_cast<size_t>(net.bus_count))
    throw TopologyError("network: load vectors must cover every bus");
  for (const Line& l : net.lines) {
    if (l.from < 0 || l.from >= net.bus_count || l.to < 0 ||
        l.to >= net.bus_count || l.from == l.to)
      throw TopologyError("network: line endpoints out of range");
    if (l.r < 0.0)
      throw TopologyError("network: negative resistance on line " +
                          std::to_string(l.from + 1) + "-" +
                          std::to_string(l.to + 1));
    if (l.r == 0.0 && l.x == 0.0)
      throw TopologyError("network: zero impedance on line " +
                          std::to_string(l.from + 1) + "-" +
                          std::to_string(l.to + 1));
  }
  order_from_slack(net);  // throws on cycles and orphans
}

LoadScenario nominal_scenario(const RadialNetwork& net) {
  return {net.p_load, net.q_load};
}

PFSolution solve(const RadialNetwork& net, const LoadScenario& sc, double tol,
                 int max_iter) {
  if (tol <= 0.0) throw ContractError("solve: tolerance must be positive");
  if (max_iter < 1) throw ContractError("solve: max_iter must be positive");
  validate_network(net);
  if (sc.p.size() != static_cast<size_t>(net.bus_count) ||
      sc.q.size() != static_cast<size_t>(net.bus_count))
    throw DimensionError("solve: scenario size disagrees with bus count");

  TreeOrder order = order_from_slack(net);
  auto ybus = bus_admittance(net);
  size_t n = static_cast<size_t>(net.bus_count);

  PFSolution sol;
  sol.v.assign(n, {net.slack_v, 0.0});
  std::vector<std::complex<double>> branch(net.lines.size());

  for (int it = 1; it <= max_iter; ++it) {
    // backward: per-bus load current, then accumulate toward the slack
    for (size_t k = n; k-- > 1;) {
      int b = order.bfs[k];
      std::complex<double> load(sc.p[static_cast<size_t>(b)],
                                sc.q[static_cast<size_t>(b)]);
      std::complex<double> cur =
          std::conj(load / sol.v[static_cast<size_t>(b)]);
      for (size_t li = 0; li < net.lines.size(); ++li)
        if (net.lines[li].from == b || net.lines[li].to == b)
          if (static_cast<int>(li) != order.line_in[static_cast<size_t>(b)])
            cur += branch[li];
      branch[static_cast<size_t>(order.line_in[static_cast<size_t>(b)])] = cur;
    }
    // forward: voltage drop from the slack outward
    for (size_t k = 1; k < n; ++k) {
      int b = order.bfs[k];
      const Line& l =
          net.lines[static_cast<size_t>(order.line_in[static_cast<size_t>(b)])];
      std::complex<double> z(l.r, l.x);
      sol.v[static_cast<size_t>(b)] =
          sol.v[static_cast<size_t>(order.parent[static_cast<size_t>(b)])] -
          z * branch[static_cast<size_t>(
                  order.line_in[static_cast<size_t>(b)])];
    }
    double mis = injection_mismatch(net, sc, ybus, sol.v);
    sol.mismatch_trace.push_back(mis);
    if (!std::isfinite(mis))
      throw DivergenceError("solve: non-finite mismatch at iteration " +
                            std::to_string(it));
    if (mis < tol) {
      sol.mismatch = mis;
      sol.iterations = it;
      return sol;
    }
  }
  std::string trace;
  size_t from = sol.mismatch_trace.size() > 5 ? sol.mismatch_trace.size() - 5
                                              : 0;
  for (size_t i = from; i < sol.mismatch_trace.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", sol.mismatch_trace[i]);
    trace += std::string(i == from ? "" : ", ") + buf;
  }
  throw DivergenceError("solve: no convergence in " +
                        std::to_string(max_iter) +
                        " iterations, trailing mismatches [" + trace + "]");
}

SyntheticDataset generate_pf_dataset(const RadialNetwork& net,
                                     double delta_pct, int64_t n,
                                     int target_bus, uint64_t seed) {
  if (!(delta_pct > 0.0 && delta_pct < 100.0))
    throw ContractError("generate_pf_dataset: delta_pct must be in (0, 100)");
  if (n < 1) throw ContractError("generate_pf_dataset: need at least one sample");
  if (target_bus < 1 || target_bus >= net.bus_count)
    throw ContractError("generate_pf_dataset: target bus must be a non-slack bus");
  validate_network(net);

  int loads = net.bus_count - 1;
  int64_t dim = 2 * loads;
  SyntheticDataset ds;
  ds.x = Tensor::zeros({n, dim});
  ds.y.reserve(static_cast<size_t>(n));

  SeededRng rng(seed);
  double span = delta_pct / 100.0;
  LoadScenario sc = nominal_scenario(net);
  for (int64_t i = 0; i < n; ++i) {
    for (int b = 1; b < net.bus_count; ++b) {
      sc.p[static_cast<size_t>(b)] =
          net.p_load[static_cast<size_t>(b)] * rng.uniform(1.0 - span, 1.0 + span);
      sc.q[static_cast<size_t>(b)] =
          net.q_load[static_cast<size_t>(b)] * rng.uniform(1.0 - span, 1.0 + span);
      ds.x.at(i, b - 1) = sc.p[static_cast<size_t>(b)];
      ds.x.at(i, loads + b - 1) = sc.q[static_cast<size_t>(b)];
    }
    try {
      PFSolution sol = solve(net, sc);
      ds.y.push_back(std::abs(sol.v[static_cast<size_t>(target_bus)]));
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + "; dataset seed " +
                            std::to_string(seed) + ", sample " +
                            std::to_string(i));
    }
  }

  for (int64_t c = 0; c < dim; ++c) {
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += ds.x.at(i, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double d = ds.x.at(i, c) - mean;
      var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(n));
    if (sd < 1e-12) sd = 1.0;  // constant column (zero nominal load)
    for (int64_t i = 0; i < n; ++i)
      ds.x.at(i, c) = (ds.x.at(i, c) - mean) / sd;
  }
  return ds;
}

RadialNetwork load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good())
    throw ParseError("network file: cannot open " + path);
  RadialNetwork net;
  bool have_slack = false;
  struct Row {
    int from, to, line_no;
    double r, x, p, q;
  };
  std::vector<Row> rows;
  int max_bus = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r' ||
                             line.back() == '\t'))
      line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);

    auto bad = [&](const std::string& why) {
      return ParseError("network file: " + why + " at line " +
                        std::to_string(line_no));
    };
    try {
      if (fields.size() == 2 && fields[0] == "slack_v") {
        if (have_slack) throw bad("duplicate slack_v header");
        net.slack_v = std::stod(fields[1]);
        have_slack = true;
        continue;
      }
      if (fields.size() != 6) throw bad("expected 6 fields");
      Row row;
      row.from = std::stoi(fields[0]);
      row.to = std::stoi(fields[1]);
      row.r = std::stod(fields[2]);
      row.x = std::stod(fields[3]);
      row.p = std::stod(fields[4]);
      row.q = std::stod(fields[5]);
      row.line_no = line_no;
      if (row.from < 1 || row.to < 1) throw bad("bus ids are 1-based");
      rows.push_back(row);
      max_bus = std::max(max_bus, std::max(row.from, row.to));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw bad("malformed number");
    }
  }
  if (!have_slack) throw ParseError("network file: missing slack_v header");
  if (rows.empty()) throw ParseError("network file: no branch rows");

  net.bus_count = max_bus;
  net.p_load.assign(static_cast<size_t>(max_bus), 0.0);
  net.q_load.assign(static_cast<size_t>(max_bus), 0.0);
  std::vector<bool> fed(static_cast<size_t>(max_bus), false);
  for (const Row& row : rows) {
    if (fed[static_cast<size_t>(row.to - 1)])
      throw TopologyError("network file: bus " + std::to_string(row.to) +
                          " fed twice (cycle), line " +
                          std::to_string(row.line_no));
    fed[static_cast<size_t>(row.to - 1)] = true;
    net.lines.push_back({row.from - 1, row.to - 1, row.r, row.x});
    net.p_load[static_cast<size_t>(row.to - 1)] = row.p;
    net.q_load[static_cast<size_t>(row.to - 1)] = row.q;
  }
  validate_network(net);
  return net;
}

void write_network_file(const std::string& path, const RadialNetwork& net) {
  validate_network(net);
  std::ofstream out(path);
  if (!out.good())
    throw ParseError("network file: cannot write " + path);
  char buf[160];
  std::snprintf(buf, sizeof buf, "slack_v,%.17g\n", net.slack_v);
  out << buf;
  for (const Line& l : net.lines) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                  l.from + 1, l.to + 1, l.r, l.x,
                  net.p_load[static_cast<size_t>(l.to)],
                  net.q_load[static_cast<size_t>(l.to)]);
    out << buf;
  }
  if (!out.good()) throw ParseError("network file: write failed for " + path);
}

RadialNetwork truncate_network(const RadialNetwork& net, int bus_count) {
  if (bus_count < 2 || bus_count > net.bus_count)
    throw ContractError("truncate_network: bus count out of range");
  RadialNetwork out;
  out.bus_count = bus_count;
  out.slack_v = net.slack_v;
  out.p_load.assign(net.p_load.begin(), net.p_load.begin() + bus_count);
  out.q_load.assign(net.q_load.begin(), net.q_load.begin() + bus_count);
  for (const Line& l : net.lines)
    if (l.from < bus_count && l.to < bus_count) out.lines.push_back(l);
  validate_network(out);
  return out;
}

}  // namespace pfn
