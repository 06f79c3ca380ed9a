#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kmplab/cost_functionals.hpp"
#include "kmplab/fields_pde.hpp"
#include "kmplab/kmp_engine.hpp"
#include "kmplab/metrics.hpp"
#include "kmplab/observables.hpp"
#include "kmplab/parallel.hpp"
#include "kmplab/path_constructions.hpp"
#include "kmplab/tilt_engine.hpp"

namespace kmplab {

// ---- outputs ----

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentOutput {
  std::vector<Table> tables;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  std::vector<TrajectoryRecord> trajectories;  // replicas kept for persistence

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  const Check& check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("no check named " + name);
  }
  double metric(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.first == name) return m.second;
    throw std::out_of_range("no metric named " + name);
  }
  void add_metric(std::string name, double v) { metrics.emplace_back(std::move(name), v); }
  void add_check(std::string name, bool pass, std::string detail) {
    checks.push_back({std::move(name), pass, std::move(detail)});
  }
};

namespace detail {

inline std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s;
}

inline std::vector<double> uniform_times(double T, int steps) {
  std::vector<double> ts;
  for (int k = 0; k <= steps; ++k) ts.push_back(T * k / steps);
  return ts;
}

// snapshots every 1/N^2
inline std::vector<double> diffusive_times(double T, int N) {
  return uniform_times(T, std::max(1, static_cast<int>(std::ceil(T * N * N))));
}

inline Profile cosine_profile() {
  return [](const Point& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0]); };
}

}  // namespace detail

// Shared description of the regular tilted path used by several experiments.
struct TiltParams {
  int d = 1;
  double T = 0.05;
  double amplitude = 0.1;  // drift bump on top of the heat flow
  double K = 8.0;          // <= 0 selects K by choose_K
  double delta = 0.05;
  double cap = 2.0;
  double rho = 1.0;
  int grid = 128;
  int slices = 33;
  int cond_samples = 20000;
  std::uint64_t cond_seed = 7;
  double event_budget = 5e8;

  template <class V>
  void visit(V& v) {
    v("d", d);
    v("T", T);
    v("amplitude", amplitude);
    v("K", K);
    v("delta", delta);
    v("cap", cap);
    v("rho", rho);
    v("grid", grid);
    v("slices", slices);
    v("cond_samples", cond_samples);
    v("cond_seed", cond_seed);
    v("event_budget", event_budget);
  }
};

inline TiltSpec build_tilt(const TiltParams& p) {
  SmoothPath u = regular_test_path(p.d, p.T, p.amplitude);
  TiltOptions opt;
  opt.grid = p.grid;
  opt.slices = p.slices;
  opt.delta = p.delta;
  if (p.K <= 0.0) opt.J_estimate = dynamic_cost(u).value;
  return make_tilt_spec(u, p.K, p.cap, p.rho, opt);
}

inline Profile initial_profile(const TiltSpec& spec) {
  return [&spec](const Point& x) { return spec.u.u(0.0, x); };
}

// ---- equilibrium-sim ----

struct EquilibriumSimParams {
  int d = 1;
  int N = 16;
  double T = 0.1;
  double rho = 1.0;
  std::string profile = "flat";  // flat | cosine
  int replicas = 200;
  int snapshots = 10;
  int save_trajectories = 0;  // first replicas kept in full
  bool record_flux = false;
  double event_budget = 5e8;

  template <class V>
  void visit(V& v) {
    v("d", d);
    v("N", N);
    v("T", T);
    v("rho", rho);
    v("profile", profile);
    v("replicas", replicas);
    v("snapshots", snapshots);
    v("save_trajectories", save_trajectories);
    v("record_flux", record_flux);
    v("event_budget", event_budget);
  }
};

inline ExperimentOutput equilibrium_sim(const EquilibriumSimParams& p, std::uint64_t seed) {
  if (p.profile != "flat" && p.profile != "cosine") throw SchemaError("profile must be flat or cosine");
  if (p.replicas < 1 || p.snapshots < 1) throw SchemaError("replicas and snapshots must be positive");
  Lattice lat(p.d, p.N);
  EquilibriumSpec eq = p.profile == "flat" ? EquilibriumSpec::global(p.rho) : EquilibriumSpec::profile(detail::cosine_profile());
  struct Row {
    double events, drift, site;
    TrajectoryRecord rec;
  };
  auto rows = parallel_map(static_cast<std::size_t>(p.replicas), [&](std::size_t r) {
    auto xi = sample_equilibrium(eq, lat, seed + r);
    SimulateOptions opt;
    opt.T = p.T;
    opt.event_budget = p.event_budget;
    opt.seed = seed + r;
    opt.record_flux = p.record_flux;
    opt.snapshot_times = detail::uniform_times(p.T, p.snapshots);
    auto rec = simulate(xi, opt);
    Row row{static_cast<double>(rec.events), rec.max_energy_drift(), rec.snapshots.back()[r % lat.site_count()], {}};
    if (static_cast<int>(r) < p.save_trajectories) row.rec = std::move(rec);
    return row;
  });
  ExperimentOutput out;
  Table t{"runs", {"replica", "events", "energy_drift", "site_value_T"}, {}};
  double worst = 0.0, ev = 0.0;
  std::vector<double> sites;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    t.rows.push_back({static_cast<double>(r), rows[r].events, rows[r].drift, rows[r].site});
    worst = std::max(worst, rows[r].drift);
    ev += rows[r].events;
    sites.push_back(rows[r].site);
    if (static_cast<int>(r) < p.save_trajectories) out.trajectories.push_back(std::move(rows[r].rec));
  }
  out.tables.push_back(t);
  const double R = static_cast<double>(p.replicas);
  const double lambda = expected_events(lat, p.T);
  out.add_metric("max_energy_drift", worst);
  out.add_metric("mean_events", ev / R);
  out.add_metric("expected_events", lambda);
  out.add_check("energy_conservation", worst <= 1e-12, "max relative drift " + detail::num(worst) + " <= 1e-12");
  out.add_check("event_rate", std::abs(ev / R - lambda) <= 4 * std::sqrt(lambda / R),
                "mean events " + detail::num(ev / R) + " vs " + detail::num(lambda) + " within 4 SE");
  if (p.profile == "flat") {
    double rho = p.rho;
    auto ks = ks_one_sample(sites, [rho](double x) { return 1 - std::exp(-x / rho); });
    out.add_metric("ks_p_value", ks.p_value);
    out.add_check("stationarity", ks.p_value > 0.01, "KS p-value " + detail::num(ks.p_value) + " > 0.01");
  }
  return out;
}

// ---- tilted-sim ----

struct TiltedSimParams {
  TiltParams tilt;
  int N = 16;
  int p_replicas = 1000;
  int q_replicas = 100;
  int snapshots = 5;

  template <class V>
  void visit(V& v) {
    tilt.visit(v);
    v("N", N);
    v("p_replicas", p_replicas);
    v("q_replicas", q_replicas);
    v("snapshots", snapshots);
  }
};

inline ExperimentOutput tilted_sim(const TiltedSimParams& p, std::uint64_t seed) {
  TiltSpec spec = build_tilt(p.tilt);
  Lattice lat(p.tilt.d, p.N);
  LatticeTilt tilt(spec, lat);
  Profile u0 = initial_profile(spec);
  auto cond = estimate_conditioning(u0, lat, spec.a, static_cast<std::size_t>(p.tilt.cond_samples), p.tilt.cond_seed);
  const auto snaps = detail::uniform_times(spec.u.T, p.snapshots);

  struct PRow {
    double jump, comp, events, drift;
  };
  auto prow = parallel_map(static_cast<std::size_t>(p.p_replicas), [&](std::size_t r) {
    auto xi = sample_equilibrium(EquilibriumSpec::conditioned(u0, spec.a), lat, seed + r);
    TiltedOptions opt;
    opt.T = spec.u.T;
    opt.event_budget = p.tilt.event_budget;
    opt.seed = seed + r;
    opt.measure = Measure::P;
    opt.snapshot_times = snaps;
    auto run = tilted_simulate(xi, tilt, opt);
    return PRow{run.ledger.log_Z_jump, run.ledger.log_Z_comp, static_cast<double>(run.record.events),
                run.record.max_energy_drift()};
  });
  struct QRow {
    WeightLedger ledger;
    double events, drift;
  };
  const std::uint64_t qbase = seed + static_cast<std::uint64_t>(p.p_replicas);
  auto qrow = parallel_map(static_cast<std::size_t>(p.q_replicas), [&](std::size_t r) {
    TiltedOptions opt;
    opt.T = spec.u.T;
    opt.event_budget = p.tilt.event_budget;
    opt.seed = qbase + r;
    opt.snapshot_times = snaps;
    auto run = tilted_replica(spec, tilt, cond, opt);
    return QRow{run.ledger, static_cast<double>(run.record.events), run.record.max_energy_drift()};
  });

  ExperimentOutput out;
  Table tp{"p_runs", {"replica", "log_Z_jump", "log_Z_comp", "Z", "events", "energy_drift"}, {}};
  std::vector<double> Z;
  double worst = 0.0;
  for (std::size_t r = 0; r < prow.size(); ++r) {
    double z = std::exp(prow[r].jump + prow[r].comp);
    Z.push_back(z);
    worst = std::max(worst, prow[r].drift);
    tp.rows.push_back({static_cast<double>(r), prow[r].jump, prow[r].comp, z, prow[r].events, prow[r].drift});
  }
  Table tq{"q_runs",
           {"replica", "log_Y0", "log_Z_jump", "log_Z_comp", "entropy_integrand", "quadrature_error_bound", "events",
            "energy_drift"},
           {}};
  for (std::size_t r = 0; r < qrow.size(); ++r) {
    const auto& l = qrow[r].ledger;
    worst = std::max(worst, qrow[r].drift);
    tq.rows.push_back({static_cast<double>(r), l.log_Y0, l.log_Z_jump, l.log_Z_comp, l.entropy_integrand,
                       l.quadrature_error_bound, qrow[r].events, qrow[r].drift});
  }
  out.tables.push_back(tp);
  out.tables.push_back(tq);
  auto ms = mean_se(Z);
  out.add_metric("K", spec.K);
  out.add_metric("theta_max", tilt.theta_max());
  out.add_metric("conditioning_log", cond.log_p);
  out.add_metric("conditioning_se", cond.se);
  out.add_metric("mean_Z_under_P", ms.mean);
  out.add_metric("se_Z_under_P", ms.se);
  out.add_metric("max_energy_drift", worst);
  out.add_check("energy_conservation", worst <= 1e-12,
                "max relative drift over " + std::to_string(prow.size() + qrow.size()) + " trajectories " +
                    detail::num(worst) + " <= 1e-12");
  if (!prow.empty())
    out.add_check("unit_mean_weight", std::abs(ms.mean - 1.0) <= 4 * ms.se,
                  "E_P[Z_T] = " + detail::num(ms.mean, 6) + " +- " + detail::num(ms.se) + ", within 4 SE of 1");
  return out;
}

// ---- hydro-check ----

struct HydroParams {
  std::string mode = "heat";  // heat | tilted
  TiltParams tilt;
  std::vector<int> Ns{16, 32, 64};
  int replicas = 50;
  int kmax = -1;
  int reference_grid = 256;

  template <class V>
  void visit(V& v) {
    v("mode", mode);
    tilt.visit(v);
    v("Ns", Ns);
    v("replicas", replicas);
    v("kmax", kmax);
    v("reference_grid", reference_grid);
  }
};

inline ExperimentOutput hydro_check(const HydroParams& p, std::uint64_t seed) {
  if (p.mode != "heat" && p.mode != "tilted") throw SchemaError("mode must be heat or tilted");
  if (p.Ns.empty() || p.replicas < 1) throw SchemaError("need at least one lattice size and one replica");
  const int d = p.tilt.d;
  const double T = p.tilt.T;
  ExperimentOutput out;
  Table t{"distances", {"N", "replica", "W"}, {}};
  std::vector<double> medians;
  if (p.mode == "heat") {
    Profile u0 = detail::cosine_profile();
    GridField ref = heat_step(GridField::sample(d, p.reference_grid, u0), T);
    for (int N : p.Ns) {
      Lattice lat(d, N);
      auto w = parallel_map(static_cast<std::size_t>(p.replicas), [&](std::size_t r) {
        auto xi = sample_equilibrium(EquilibriumSpec::profile(u0), lat, seed + r);
        SimulateOptions opt;
        opt.T = T;
        opt.event_budget = p.tilt.event_budget;
        opt.seed = seed + r;
        opt.snapshot_times = {T};
        return flat_distance(simulate(xi, opt).snapshots.back(), ref, p.kmax);
      });
      for (std::size_t r = 0; r < w.size(); ++r) t.rows.push_back({double(N), double(r), w[r]});
      medians.push_back(median(w));
    }
  } else {
    TiltSpec spec = build_tilt(p.tilt);
    SplittingOptions so;
    so.output_times = {0.0, T};
    GridField ref = tfp_solve(spec.u.sample_u(0.0, p.reference_grid), spec.H, spec.chi, spec.K, T, so).series.slices().back();
    out.add_metric("K", spec.K);
    for (int N : p.Ns) {
      Lattice lat(d, N);
      LatticeTilt tilt(spec, lat);
      auto cond = estimate_conditioning(initial_profile(spec), lat, spec.a,
                                        static_cast<std::size_t>(p.tilt.cond_samples), p.tilt.cond_seed);
      auto w = parallel_map(static_cast<std::size_t>(p.replicas), [&](std::size_t r) {
        TiltedOptions opt;
        opt.T = T;
        opt.event_budget = p.tilt.event_budget;
        opt.seed = seed + r;
        opt.snapshot_times = {T};
        return flat_distance(tilted_replica(spec, tilt, cond, opt).record.snapshots.back(), ref, p.kmax);
      });
      for (std::size_t r = 0; r < w.size(); ++r) t.rows.push_back({double(N), double(r), w[r]});
      medians.push_back(median(w));
    }
  }
  out.tables.push_back(t);
  for (std::size_t i = 0; i < p.Ns.size(); ++i) out.add_metric("median_W_N" + std::to_string(p.Ns[i]), medians[i]);
  out.add_check("median_distance_decreasing", detail::strictly_decreasing(medians),
                "median W~ over N = " + detail::join(medians));
  return out;
}

// ---- entropy-check ----

struct EntropyParams {
  TiltParams tilt;
  std::vector<int> Ns{32, 64};
  int replicas = 400;
  double tolerance = 0.15;

  template <class V>
  void visit(V& v) {
    tilt.visit(v);
    v("Ns", Ns);
    v("replicas", replicas);
    v("tolerance", tolerance);
  }
};

// (1/N^d)(log Y_0 + entropy integrand) under Q against S_rho(u_0) + (1/2) int R_K u^2 |grad H|^2.
inline ExperimentOutput entropy_check(const EntropyParams& p, std::uint64_t seed) {
  if (p.Ns.empty() || p.replicas < 2) throw SchemaError("need lattice sizes and at least two replicas");
  TiltSpec spec = build_tilt(p.tilt);
  const double S0 = static_cost(spec.u.sample_u(0.0, p.tilt.grid), spec.rho);
  const double cost = tilted_cost(spec, p.tilt.grid).value;
  const double target = S0 + cost;
  ExperimentOutput out;
  out.add_metric("S0", S0);
  out.add_metric("tilted_cost", cost);
  out.add_metric("target", target);
  Table t{"ledger", {"N", "replica", "log_Y0", "log_Z", "entropy_integrand", "per_volume"}, {}};
  std::vector<double> gaps;
  for (int N : p.Ns) {
    Lattice lat(p.tilt.d, N);
    LatticeTilt tilt(spec, lat);
    auto cond = estimate_conditioning(initial_profile(spec), lat, spec.a, static_cast<std::size_t>(p.tilt.cond_samples),
                                      p.tilt.cond_seed);
    const double vol = static_cast<double>(lat.site_count());
    auto ledgers = parallel_map(static_cast<std::size_t>(p.replicas), [&](std::size_t r) {
      TiltedOptions opt;
      opt.T = spec.u.T;
      opt.event_budget = p.tilt.event_budget;
      opt.seed = seed + r;
      return tilted_replica(spec, tilt, cond, opt).ledger;
    });
    std::vector<double> pv;
    for (std::size_t r = 0; r < ledgers.size(); ++r) {
      const auto& l = ledgers[r];
      if (l.excluded) continue;
      double v = (l.log_Y0 + l.entropy_integrand) / vol;
      pv.push_back(v);
      t.rows.push_back({double(N), double(r), l.log_Y0, l.log_Z(), l.entropy_integrand, v});
    }
    auto ms = mean_se(pv);
    double gap = (ms.mean - target) / target;
    gaps.push_back(gap);
    std::string tag = "_N" + std::to_string(N);
    out.add_metric("mean_per_volume" + tag, ms.mean);
    out.add_metric("se_per_volume" + tag, ms.se);
    out.add_metric("relative_gap" + tag, gap);
    out.add_metric("conditioning_log" + tag, cond.log_p);
  }
  out.tables.push_back(t);
  out.add_check("within_tolerance", std::abs(gaps.back()) <= p.tolerance,
                "relative gap at N = " + std::to_string(p.Ns.back()) + ": " + detail::num(gaps.back()) +
                    " (tolerance " + detail::num(p.tolerance) + ")");
  if (gaps.size() >= 2) {
    double a = std::abs(gaps[gaps.size() - 2]), b = std::abs(gaps.back());
    out.add_check("gap_shrinking", b < a, "|gap| " + detail::num(a) + " -> " + detail::num(b));
  }
  return out;
}

// ---- replacement-sweep ----

struct ReplacementParams {
  TiltParams tilt;
  std::string function = "capped";  // capped (untilted, bounded) | pair (under Q)
  double level = 1.0;               // cap of the bounded function
  int N_small = 16;
  int N_large = 64;
  int comparisons = 50;
  int per_comparison = 9;
  double eps = 0.1;
  int min_wins = 45;

  template <class V>
  void visit(V& v) {
    tilt.visit(v);
    v("function", function);
    v("level", level);
    v("N_small", N_small);
    v("N_large", N_large);
    v("comparisons", comparisons);
    v("per_comparison", per_comparison);
    v("eps", eps);
    v("min_wins", min_wins);
  }
};

inline ExperimentOutput replacement_sweep(const ReplacementParams& p, std::uint64_t seed) {
  if (p.function != "capped" && p.function != "pair") throw SchemaError("function must be capped or pair");
  if (p.comparisons < 1 || p.per_comparison < 1) throw SchemaError("comparison counts must be positive");
  const bool tilted = p.function == "pair";
  const double T = p.tilt.T;
  TiltSpec spec;
  if (tilted) spec = build_tilt(p.tilt);
  LocalFunction F = tilted ? local::pair_product(spec.K) : local::capped_site(p.level);
  SpaceTimeWeight phi = [](double, const Point& x) { return std::cos(kTwoPi * x[0]); };
  Profile u0 = detail::cosine_profile();

  struct Level {
    Lattice lat;
    LatticeTilt tilt;
    ConditioningEstimate cond;
  };
  auto make_level = [&](int N) {
    Level l{Lattice(p.tilt.d, N), {}, {}};
    if (tilted) {
      l.tilt = LatticeTilt(spec, l.lat);
      l.cond = estimate_conditioning(initial_profile(spec), l.lat, spec.a,
                                     static_cast<std::size_t>(p.tilt.cond_samples), p.tilt.cond_seed);
    }
    return l;
  };
  Level small = make_level(p.N_small), large = make_level(p.N_large);
  bool coarse = false;
  auto statistic = [&](const Level& lv, std::uint64_t s) {
    const auto ts = detail::diffusive_times(T, lv.lat.N());
    TrajectoryRecord rec;
    if (tilted) {
      TiltedOptions opt;
      opt.T = T;
      opt.event_budget = p.tilt.event_budget;
      opt.seed = s;
      opt.snapshot_times = ts;
      rec = tilted_replica(spec, lv.tilt, lv.cond, opt).record;
    } else {
      auto xi = sample_equilibrium(EquilibriumSpec::profile(u0), lv.lat, s);
      SimulateOptions opt;
      opt.T = T;
      opt.event_budget = p.tilt.event_budget;
      opt.seed = s;
      opt.snapshot_times = ts;
      rec = simulate(xi, opt);
    }
    return replacement_statistic(rec, F, phi, p.eps);
  };
  const std::size_t total = static_cast<std::size_t>(p.comparisons) * p.per_comparison;
  auto vals = parallel_map(total, [&](std::size_t i) {
    std::uint64_t s = seed + i;
    auto a = statistic(small, s), b = statistic(large, s);
    return std::array<double, 3>{std::abs(a.value), std::abs(b.value), (a.coarse_snapshots || b.coarse_snapshots) ? 1.0 : 0.0};
  });
  ExperimentOutput out;
  Table t{"comparisons", {"comparison", "median_small", "median_large"}, {}};
  int wins = 0;
  std::vector<double> ms, ml;
  for (int j = 0; j < p.comparisons; ++j) {
    std::vector<double> a, b;
    for (int r = 0; r < p.per_comparison; ++r) {
      const auto& v = vals[static_cast<std::size_t>(j) * p.per_comparison + r];
      a.push_back(v[0]);
      b.push_back(v[1]);
      if (v[2] > 0) coarse = true;
    }
    double ma = median(a), mb = median(b);
    ms.push_back(ma);
    ml.push_back(mb);
    if (mb < ma) ++wins;
    t.rows.push_back({double(j), ma, mb});
  }
  out.tables.push_back(t);
  if (coarse) out.warnings.push_back("snapshot spacing above 100/N^2");
  out.add_metric("wins", wins);
  out.add_metric("median_small", median(ms));
  out.add_metric("median_large", median(ml));
  out.add_check("weak_law_trend", wins >= p.min_wins,
                std::to_string(wins) + "/" + std::to_string(p.comparisons) + " comparisons with N = " +
                    std::to_string(p.N_large) + " below N = " + std::to_string(p.N_small) + " (need " +
                    std::to_string(p.min_wins) + ")");
  return out;
}

// ---- pathological-1d ----

struct Pathological1DParams {
  std::vector<int> ns{4, 8, 16, 32};
  double t0 = 0.5;
  double x0 = 0.5;
  double sigma0 = 0.4;
  double T = 1.0;
  double rel_tol = 1e-6;
  double max_variation = 0.25;

  template <class V>
  void visit(V& v) {
    v("ns", ns);
    v("t0", t0);
    v("x0", x0);
    v("sigma0", sigma0);
    v("T", T);
    v("rel_tol", rel_tol);
    v("max_variation", max_variation);
  }
};

inline ExperimentOutput pathological_1d(const Pathological1DParams& p, std::uint64_t) {
  if (p.ns.size() < 2) throw SchemaError("need at least two values of n");
  ExperimentOutput out;
  Table t{"costs", {"n", "J_optimal", "J_error", "J_competitor"}, {}};
  std::vector<double> J;
  auto res = parallel_map(p.ns.size(), [&](std::size_t i) {
    auto s = build_singular_1d(p.ns[i], p.t0, p.x0, p.sigma0, p.T);
    return std::array<double, 3>{s.path.optimal_cost(p.rel_tol).value, s.path.optimal_cost(p.rel_tol).error_estimate,
                                 s.path.competitor_cost(p.rel_tol).value};
  });
  for (std::size_t i = 0; i < p.ns.size(); ++i) {
    t.rows.push_back({double(p.ns[i]), res[i][0], res[i][1], res[i][2]});
    J.push_back(res[i][0]);
    out.add_metric("J_n" + std::to_string(p.ns[i]), res[i][0]);
  }
  out.tables.push_back(t);
  bool finite = std::all_of(J.begin(), J.end(), [](double v) { return std::isfinite(v) && v >= 0.0; });
  double var = std::abs(J.back() - J[J.size() - 2]) / J[J.size() - 2];
  out.add_metric("last_variation", var);
  out.add_check("bounded_cost", finite, "J = " + detail::join(J));
  out.add_check("cost_converging", var < p.max_variation,
                "variation between the last two " + detail::num(var) + " < " + detail::num(p.max_variation));
  auto s = build_singular_1d(p.ns.back(), p.t0, p.x0, p.sigma0, p.T);
  auto tab = tv_jump_table(s.limit);
  double mass = singular_mass_at(s.limit, p.t0);
  bool atom = mass == 1.0 && tab.size() == 1 && tab[0].t == p.t0 && tab[0].tv == 0.0;
  out.add_metric("limit_atom_mass", mass);
  out.add_check("limit_atom_exact", atom,
                "singular mass at t0 = " + detail::num(mass, 17) + ", jump table entries " + std::to_string(tab.size()));
  return out;
}

// ---- pathological-2d ----

struct Pathological2DParams {
  std::vector<int> ns{1, 2, 4};
  std::vector<int> ms{16, 32, 64};
  double gamma = 1.0 / 3.0;
  double sigma0 = 0.15;
  double rel_tol = 1e-6;
  double residual_tol = 1e-5;
  double envelope_factor = 2.0;

  template <class V>
  void visit(V& v) {
    v("ns", ns);
    v("ms", ms);
    v("gamma", gamma);
    v("sigma0", sigma0);
    v("rel_tol", rel_tol);
    v("residual_tol", residual_tol);
    v("envelope_factor", envelope_factor);
  }
};

// Jumps k = 1..4: eps_k = 0.1 * 4^{-(k-1)} at t_k = 0.2 k, from (1/4, y_k) to (3/4, y_k).
inline JumpSpec2D standard_jumps(int count, double gamma, double sigma0) {
  if (count < 1 || count > 4) throw SchemaError("between one and four jumps are supported");
  JumpSpec2D s;
  for (int k = 1; k <= count; ++k) {
    s.eps.push_back(0.1 * std::pow(4.0, -(k - 1)));
    s.t.push_back(0.2 * k);
    s.a.push_back({0.25, 0.125 + 0.25 * (k - 1), 0});
    s.b.push_back({0.75, 0.125 + 0.25 * (k - 1), 0});
  }
  s.gamma = gamma;
  s.sigma0 = sigma0;
  return s;
}

inline ExperimentOutput pathological_2d(const Pathological2DParams& p, std::uint64_t) {
  if (p.ns.empty() || p.ms.empty()) throw SchemaError("need values of n and m");
  const int nmax = *std::max_element(p.ns.begin(), p.ns.end());
  JumpSpec2D base = standard_jumps(nmax, p.gamma, p.sigma0);
  ExperimentOutput out;
  std::vector<std::pair<int, int>> grid;
  for (int n : p.ns)
    for (int m : p.ms) grid.emplace_back(n, m);
  struct Cell {
    double J, env;
    std::vector<std::string> warnings;
  };
  auto cells = parallel_map(grid.size(), [&](std::size_t i) {
    JumpSpec2D s = base;
    s.n = grid[i].first;
    s.m = grid[i].second;
    auto j = build_jump_2d(s);
    return Cell{j.path.optimal_cost(p.rel_tol).value, cost_envelope(s.eps, s.n, s.theta(), s.m), j.warnings};
  });
  Table t{"costs", {"n", "m", "J_optimal", "envelope", "ratio"}, {}};
  double logc = 0.0;
  std::vector<double> ratio;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double r = cells[i].J / cells[i].env;
    ratio.push_back(r);
    logc += std::log(r);
    t.rows.push_back({double(grid[i].first), double(grid[i].second), cells[i].J, cells[i].env, r});
    for (const auto& w : cells[i].warnings) out.warnings.push_back(w);
  }
  out.tables.push_back(t);
  const double C = std::exp(logc / ratio.size());
  const double worst = *std::max_element(ratio.begin(), ratio.end());
  out.add_metric("fitted_C", C);
  out.add_metric("max_ratio", worst);
  out.add_metric("min_ratio", *std::min_element(ratio.begin(), ratio.end()));
  out.add_check("cost_envelope", worst <= p.envelope_factor * C,
                "max J/envelope " + detail::num(worst) + " <= " + detail::num(p.envelope_factor) + " x fitted C " +
                    detail::num(C));

  JumpSpec2D s = base;
  s.n = nmax;
  s.m = *std::min_element(p.ms.begin(), p.ms.end());
  auto j = build_jump_2d(s);
  auto tab = tv_jump_table(j.limit);
  Table tj{"jumps", {"k", "t", "tv", "expected"}, {}};
  bool exact = tab.size() == static_cast<std::size_t>(nmax);
  for (std::size_t k = 0; k < tab.size(); ++k) {
    double expect = k < s.eps.size() ? 2.0 * s.eps[k] : 0.0;
    exact = exact && tab[k].tv == expect && tab[k].t == s.t[k];
    tj.rows.push_back({double(k + 1), tab[k].t, tab[k].tv, expect});
  }
  out.tables.push_back(tj);
  out.add_check("jump_tv_exact", exact, std::to_string(tab.size()) + " jumps, TV = 2 eps_k compared exactly");

  const std::vector<Mode> modes{{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, -1, 0}};
  auto res = parallel_map(modes.size(), [&](std::size_t i) {
    return std::abs(weak_residual(j.path, trig_test_function(modes[i], 2, 0.4), 1e-7));
  });
  Table tr{"residuals", {"k1", "k2", "residual"}, {}};
  double rmax = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    rmax = std::max(rmax, res[i]);
    tr.rows.push_back({double(modes[i][0]), double(modes[i][1]), res[i]});
  }
  out.tables.push_back(tr);
  out.add_metric("max_weak_residual", rmax);
  out.add_check("weak_residual", rmax <= p.residual_tol,
                "max weak skeleton residual " + detail::num(rmax) + " <= " + detail::num(p.residual_tol));
  return out;
}

// ---- pathological-3d ----

struct Pathological3DParams {
  std::vector<int> ns{2, 4, 8};
  std::string target = "uniform";  // uniform | two-bump
  double min_drop = 10.0;
  int kmax = 6;
  int k0max = 8;
  double rel_tol = 1e-6;

  template <class V>
  void visit(V& v) {
    v("ns", ns);
    v("target", target);
    v("min_drop", min_drop);
    v("kmax", kmax);
    v("k0max", k0max);
    v("rel_tol", rel_tol);
  }
};

inline RelaxedMeasure two_bump_target() {
  return moving_gaussians(3, 1.0, 1.0,
                          {{{0.3, 0.3, 0.3}, {0.5, 0.2, 0.0}, 0.5, 0.12}, {{0.7, 0.6, 0.5}, {-0.3, 0.0, 0.4}, 0.5, 0.12}});
}

inline ExperimentOutput pathological_3d(const Pathological3DParams& p, std::uint64_t seed) {
  if (p.target != "uniform" && p.target != "two-bump") throw SchemaError("target must be uniform or two-bump");
  if (p.ns.size() < 2) throw SchemaError("need at least two values of n");
  Relaxed3DSpec sp;
  sp.target = p.target == "uniform" ? uniform_target(3, 1.0, 2.0) : two_bump_target();
  sp.seed = seed;
  ExperimentOutput out;
  struct Row {
    double J, W, reroutes;
    std::vector<std::string> warnings;
  };
  auto rows = parallel_map(p.ns.size(), [&](std::size_t i) {
    auto r = build_relaxed_3d(sp, p.ns[i]);
    return Row{r.path.optimal_cost(p.rel_tol).value, relaxed_distance(r.path.relaxed(), sp.target, p.kmax, p.k0max),
               double(r.reroutes), r.warnings};
  });
  Table t{"costs", {"n", "J_optimal", "W", "reroutes"}, {}};
  std::vector<double> J, W;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.rows.push_back({double(p.ns[i]), rows[i].J, rows[i].W, rows[i].reroutes});
    J.push_back(rows[i].J);
    W.push_back(rows[i].W);
    for (const auto& w : rows[i].warnings) out.warnings.push_back(w);
  }
  out.tables.push_back(t);
  double drop = J.front() / J.back();
  out.add_metric("cost_drop", drop);
  out.add_check("cost_drop", drop >= p.min_drop && detail::strictly_decreasing(J),
                "J = " + detail::join(J) + ", drop " + detail::num(drop) + " >= " + detail::num(p.min_drop));
  out.add_check("distance_decreasing", detail::strictly_decreasing(W), "W~ = " + detail::join(W));
  return out;
}

// ---- dissipation-sweep ----

struct DissipationParams {
  std::vector<int> ds{1, 2, 3};
  std::vector<double> eps{1.0, 0.1, 0.01, 0.001};
  std::vector<int> sigma_log2{2, 3, 4, 5, 6};  // sigma = 2^-b
  double fit_eps = 1.0;
  double exponent_tol = 0.1;

  template <class V>
  void visit(V& v) {
    v("ds", ds);
    v("eps", eps);
    v("sigma_log2", sigma_log2);
    v("fit_eps", fit_eps);
    v("exponent_tol", exponent_tol);
  }
};

inline ExperimentOutput dissipation_sweep(const DissipationParams& p, std::uint64_t) {
  ExperimentOutput out;
  Table t{"sweep", {"d", "theta", "eps", "sigma", "value", "bound"}, {}};
  bool below = true;
  std::string worst;
  double worst_ratio = 0.0;
  std::vector<double> sig;
  for (int b : p.sigma_log2) sig.push_back(std::ldexp(1.0, -b));
  bool exps = true;
  std::string exp_detail;
  for (int d : p.ds) {
    double th = default_theta(d);
    for (double e : p.eps)
      for (double s : sig) {
        auto r = dissipation_integral(e, s, th, d);
        t.rows.push_back({double(d), th, e, s, r.value, r.bound});
        double ratio = r.value / r.bound;
        if (ratio > worst_ratio) worst_ratio = ratio;
        if (!(r.value <= r.bound)) {
          below = false;
          worst = "d=" + std::to_string(d) + " eps=" + detail::num(e) + " sigma=" + detail::num(s);
        }
      }
    double slope = sigma_exponent(p.fit_eps, sig, th, d);
    double expect = d * th - 2.0;
    out.add_metric("sigma_exponent_d" + std::to_string(d), slope);
    exps = exps && std::abs(slope - expect) <= p.exponent_tol;
    exp_detail += (exp_detail.empty() ? "" : "; ") + std::string("d=") + std::to_string(d) + ": " + detail::num(slope) +
                  " vs " + detail::num(expect);
  }
  out.tables.push_back(t);
  out.add_metric("max_value_over_bound", worst_ratio);
  out.add_check("bound_holds", below,
                below ? "max value/bound " + detail::num(worst_ratio) + " <= 1 on the full grid" : "violated at " + worst);
  out.add_check("sigma_exponent", exps, exp_detail + " (tolerance " + detail::num(p.exponent_tol) + ")");
  return out;
}

// ---- lyapunov-check ----

struct LyapunovParams {
  TiltParams tilt;
  int N = 16;
  int samples = 1000;
  int heldout = 1000;
  bool tilted = false;
  double t = 0.025;

  template <class V>
  void visit(V& v) {
    tilt.visit(v);
    v("N", N);
    v("samples", samples);
    v("heldout", heldout);
    v("tilted", tilted);
    v("t", t);
  }
};

inline ExperimentOutput lyapunov_check(const LyapunovParams& p, std::uint64_t seed) {
  if (p.samples < 3) throw SchemaError("need at least three samples");
  Lattice lat(p.tilt.d, p.N);
  LatticeTilt tilt = LatticeTilt::zero(lat, p.tilt.K > 0 ? p.tilt.K : 1.0);
  TiltSpec spec;
  if (p.tilted) {
    spec = build_tilt(p.tilt);
    tilt = LatticeTilt(spec, lat);
  }
  const double rho = p.tilt.rho;
  Profile flat = [rho](const Point&) { return rho; };
  auto draw = [&](int count, std::uint64_t base) {
    return parallel_map(static_cast<std::size_t>(count), [&](std::size_t i) {
      auto eq = p.tilted ? EquilibriumSpec::conditioned(flat, spec.a) : EquilibriumSpec::global(rho);
      auto xi = sample_equilibrium(eq, lat, base + i);
      return lyapunov_samples({xi}, tilt, p.t).front();
    });
  };
  auto fit = draw(p.samples, seed);
  auto rep = lyapunov_drift_check(fit);
  ExperimentOutput out;
  Table t{"samples", {"index", "LF", "F", "l2"}, {}};
  for (std::size_t i = 0; i < fit.size(); ++i) t.rows.push_back({double(i), fit[i].LF, fit[i].F, fit[i].l2});
  out.tables.push_back(t);
  out.add_metric("c_ls", rep.c_ls);
  out.add_metric("C_ls", rep.C_ls);
  out.add_metric("c", rep.c);
  out.add_metric("C", rep.C);
  out.add_metric("violations", double(rep.violations));
  if (p.heldout > 0) {
    auto held = draw(p.heldout, seed + static_cast<std::uint64_t>(p.samples));
    out.add_metric("heldout_violations", double(count_violations(held, rep.c, rep.C)));
  }
  out.add_check("feasible_pair", rep.c > 0.0 && rep.C > 0.0 && std::isfinite(rep.C),
                "fitted c = " + detail::num(rep.c) + ", C = " + detail::num(rep.C));
  out.add_check("no_violations", rep.violations == 0,
                std::to_string(rep.violations) + " violations over " + std::to_string(fit.size()) + " samples");
  return out;
}

}  // namespace kmplab
