#include "nfl/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "nfl/controller.hpp"
#include "nfl/fixtures.hpp"
#include "nfl/lfr.hpp"
#include "nfl/multiplier.hpp"
#include "nfl/simulate.hpp"
#include "nfl/synthesis.hpp"

namespace nfl::cli {

namespace fs = std::filesystem;

namespace {

std::string numbered(const std::string& stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03zu.csv", stem.c_str(), i);
  return buf;
}

ProjectConfig config_with_overrides(const Options& o) {
  if (o.config.empty()) throw ParseError("--config is required");
  ProjectConfig c = load_config(o.config);
  if (o.eps) c.synthesis.eps = *o.eps;
  if (o.multiplier) c.synthesis.multiplier = multiplier_class_from_string(*o.multiplier);
  if (o.objective) c.synthesis.objective = objective_from_string(*o.objective);
  if (o.horizon) c.simulation.horizon = *o.horizon;
  if (o.seed) c.simulation.seed = *o.seed;
  if (c.synthesis.eps <= 0.0) throw ParseError("--eps must be positive");
  if (c.simulation.horizon < 1) throw ParseError("--horizon must be at least 1");
  return c;
}

fs::path result_path(const Options& o) { return o.result.empty() ? fs::path(o.out) / "result.json" : fs::path(o.result); }

// Strictly upper block triangular with respect to the INN block sizes.
bool block_triangular(const Inn& inn) {
  Index start = 0;
  for (Index n : inn.block_sizes) {
    if (!inn.F.block(start, 0, n, start + n).isZero(0.0)) return false;
    start += n;
  }
  return true;
}

void check_dims(const SynthesisResult& r, const BilinearNfl& sys) {
  if (r.dims.l != sys.l() || r.dims.m != sys.m() || r.dims.k_phi != sys.k_phi() || r.dims.k_psi != sys.k_psi()) {
    throw ParseError("result dimensions do not match the configured plant");
  }
}

Json write_runs(const fs::path& dir, const std::string& stem, const BatchResult& b, const RegionZ& region,
                const Vec& z_star) {
  Json runs = Json::array();
  for (std::size_t i = 0; i < b.trajectories.size(); ++i) {
    Json r = {{"index", i}};
    if (!b.failures[i].empty()) {
      r["failure"] = b.failures[i];
    } else {
      const Trajectory& tr = b.trajectories[i];
      const fs::path file = dir / numbered(stem, i);
      std::ofstream csv(file);
      if (!csv) throw Error("cannot write " + file.string());
      write_trajectory_csv(csv, tr);
      const RunReport rep = verify_run(tr, region, z_star);
      r["file"] = file.filename().string();
      r["decrease_violations"] = rep.decrease_violations;
      r["region_exits"] = rep.region_exits;
      r["max_iterations"] = rep.max_iterations;
      r["decay_rate"] = rep.decay_rate;
      r["peak"] = rep.peak;
      r["converged"] = rep.converged;
    }
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace

int cmd_convert(const Options& o, std::ostream& out, std::ostream&) {
  if (o.input.empty()) throw ParseError("convert needs a weight file");
  const Json j = read_json_file(o.input);
  const Mlp mlp = mlp_from_json(j);
  const Inn inn = mlp_to_inn(mlp);
  const fs::path dest = o.output.empty() ? fs::path(o.out) / (fs::path(o.input).stem().string() + "_inn.json")
                                         : fs::path(o.output);
  write_json_file(dest, to_json(inn));
  out << "k = " << inn.state_dim() << ", m = " << inn.input_dim() << ", p = " << inn.output_dim() << '\n';
  out << "F strictly upper block triangular: " << (block_triangular(inn) ? "yes" : "no") << '\n';
  out << "wrote " << dest.string() << '\n';
  return Ok;
}

int cmd_synthesize(const Options& o, std::ostream& out, std::ostream&) {
  const ProjectConfig cfg = config_with_overrides(o);
  const BilinearNfl sys = cfg.load_system();
  const double eq = check_equilibrium(sys);
  if (eq > 1e-8) out << "warning: (z*, u*) is not an equilibrium, residual " << eq << '\n';

  const SynthesisResult res = synthesize(sys, cfg.synthesis);
  const RegionZ region = sys.region.shifted_to(sys.z_star);
  const RoaCertificate roa_cert = roa(res, region, 1000, cfg.simulation.seed);
  const fs::path dir(o.out);
  write_json_file(dir / "result.json", to_json(res));
  Json timing = {{"synthesis_seconds", res.wall_time}};
  out << std::setprecision(6);
  out << "feasible: trace(P) = " << res.trace_P << ", left min eig = " << res.left_min_eig
      << ", right max eig = " << res.right_max_eig << ", " << res.iterations << " iterations (" << res.phase << ", "
      << res.backend << "), " << res.wall_time << " s\n";
  out << "ROA boundary margin " << roa_cert.worst_margin << " over " << roa_cert.samples << " samples\n";
  if (o.baseline) {
    const SynthesisResult base = synthesize(sys.without_networks(), cfg.synthesis);
    write_json_file(dir / "baseline_result.json", to_json(base));
    timing["baseline_seconds"] = base.wall_time;
    out << "baseline: trace(P) = " << base.trace_P << '\n';
  }
  write_json_file(dir / "timing.json", timing);
  out << "wrote " << (dir / "result.json").string() << '\n';
  return Ok;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const ProjectConfig cfg = config_with_overrides(o);
  const BilinearNfl sys = cfg.load_system();
  const fs::path rpath = result_path(o);
  const SynthesisResult res = result_from_json(read_json_file(rpath));
  check_dims(res, sys);
  const ShiftedLfr lfr = shift_lfr(sys);
  const ImplicitController ctrl = ImplicitController::from(lfr, res);
  const SimulationConfig& sc = cfg.simulation;

  std::vector<Vec> starts = sc.initial_states;
  for (const Vec& z : starts) {
    if (z.size() != sys.l()) throw ParseError("initial state has wrong length");
  }
  const std::vector<Vec> sampled = sample_ellipsoid(res.P, sys.z_star, sc.initial_conditions, sc.seed);
  starts.insert(starts.end(), sampled.begin(), sampled.end());

  const fs::path dir(o.out);
  fs::create_directories(dir);
  const BatchResult batch = rollout_batch(sys, ctrl, starts, sc.horizon, res.P);
  Json runs = write_runs(dir, "traj", batch, sys.region, sys.z_star);

  const Eigen::LLT<Mat> llt(res.P);
  int failures = 0, violations = 0, exits = 0, uncertified = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const Vec d = starts[i] - sys.z_star;
    const bool certified = d.dot(llt.solve(d)) <= 1.0 + 1e-9;
    runs[i]["certified_start"] = certified;
    runs[i]["z0"] = to_json(starts[i]);
    if (!certified) ++uncertified;
    if (runs[i].contains("failure")) {
      ++failures;
      continue;
    }
    if (certified) {
      violations += static_cast<int>(runs[i]["decrease_violations"].size());
      exits += static_cast<int>(runs[i]["region_exits"].size());
    }
  }
  Json report = {{"trajectories", starts.size()},
                 {"horizon", sc.horizon},
                 {"seed", sc.seed},
                 {"uncertified_starts", uncertified},
                 {"failures", failures},
                 {"certified_decrease_violations", violations},
                 {"certified_region_exits", exits},
                 {"runs", runs}};

  if (o.baseline) {
    const fs::path bpath = rpath.parent_path() / "baseline_result.json";
    SynthesisResult base;
    if (fs::exists(bpath)) {
      base = result_from_json(read_json_file(bpath));
    } else {
      base = synthesize(sys.without_networks(), cfg.synthesis);
      write_json_file(dir / "baseline_result.json", to_json(base));
    }
    const ImplicitController bctrl = baseline_controller(sys, base);
    const BatchResult bb = rollout_batch(sys, bctrl, starts, sc.horizon, base.P);
    const Json bruns = write_runs(dir, "baseline", bb, sys.region, sys.z_star);
    Json pairs = Json::array();
    int worse = 0, left = 0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      if (bruns[i].contains("region_exits") && !bruns[i]["region_exits"].empty()) ++left;
      if (runs[i].contains("failure") || bruns[i].contains("failure")) continue;
      const double pf = runs[i]["peak"], pb = bruns[i]["peak"];
      const double rf = runs[i]["decay_rate"], rb = bruns[i]["decay_rate"];
      const bool baseline_worse = pb > pf || rb > rf;
      worse += baseline_worse;
      pairs.push_back({{"index", i},
                       {"peak", pf},
                       {"peak_baseline", pb},
                       {"decay_rate", rf},
                       {"decay_rate_baseline", rb},
                       {"baseline_worse", baseline_worse}});
    }
    report["baseline"] = {{"runs", bruns}, {"comparison", pairs}, {"baseline_worse_count", worse},
                          {"baseline_region_exit_count", left}};
    out << "baseline worse (peak or decay) on " << worse << " of " << pairs.size() << " paired starts, left the region on "
        << left << "\n";
  }
  write_json_file(dir / "simulation_report.json", report);
  out << starts.size() << " trajectories, " << failures << " controller failures, " << uncertified
      << " uncertified starts, " << violations << " Lyapunov violations and " << exits
      << " region exits on certified starts\n";
  if (failures > 0) err << "some rollouts failed; see simulation_report.json\n";
  return Ok;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream&) {
  const ProjectConfig cfg = config_with_overrides(o);
  const BilinearNfl sys = cfg.load_system();
  const SynthesisResult res = result_from_json(read_json_file(result_path(o)));
  check_dims(res, sys);
  const ShiftedLfr lfr = shift_lfr(sys);
  const RegionZ region = sys.region.shifted_to(sys.z_star);
  const unsigned seed = cfg.simulation.seed;

  bool all = true;
  auto report = [&](const std::string& name, bool ok, double value, const std::string& bound) {
    all = all && ok;
    out << (ok ? "PASS " : "FAIL ") << std::left << std::setw(22) << name << std::setprecision(6) << value << "  ("
        << bound << ")\n";
  };
  auto guarded = [&](const std::string& name, const std::string& bound, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      all = false;
      out << "FAIL " << std::left << std::setw(22) << name << e.what() << "  (" << bound << ")\n";
    }
  };

  guarded("lmi left", "min eig >= eps/2", [&] {
    const LmiResiduals r = lmi_residuals(lfr, region, res);
    report("lmi left", r.left_min_eig >= 0.5 * res.eps, r.left_min_eig, "min eig >= eps/2");
    report("lmi right", r.right_max_eig <= 1e-8, r.right_max_eig, "max eig <= 1e-8");
  });
  guarded("gain relations", "<= 1e-9", [&] {
    const double g = gain_relation_residual(res, region);
    report("gain relations", g <= 1e-9, g, "<= 1e-9");
  });
  guarded("primal M > 0", "min eig > 0", [&] {
    const double e = min_eig(primal_check_matrix(lfr, region, res));
    report("primal M > 0", e > 0.0, e, "min eig > 0");
  });
  guarded("roa containment", "margin >= -1e-8", [&] {
    const RoaCertificate c = check_containment(res.P, region, 1000, seed);
    report("roa containment", true, c.worst_margin, "margin >= -1e-8");
  });
  if (sys.has_nn_channels()) {
    guarded("delta-qc sampling", "form >= -1e-12", [&] {
      const double q = delta_qc_min_sample(sys.activation(), 10000, seed);
      report("delta-qc sampling", q >= -1e-12, q, "form >= -1e-12");
    });
  }
  out << (all ? "verification passed\n" : "verification failed\n");
  return all ? Ok : CheckFailed;
}

fs::path write_project(const fs::path& dir, const BilinearNfl& sys) {
  fs::create_directories(dir);
  Json plant = {{"A0", to_json(sys.A0)}, {"B0", to_json(sys.B0)}, {"Dt", to_json(sys.Dt)}};
  write_json_file(dir / "plant.json", plant);
  ProjectConfig cfg;
  cfg.base_dir = dir;
  cfg.plant_file = dir / "plant.json";
  if (sys.phi.state_dim() > 0 || !sys.phi.J.isZero(0.0) || !sys.phi.by.isZero(0.0)) {
    cfg.phi_file = dir / "phi.json";
    write_json_file(*cfg.phi_file, to_json(sys.phi));
  }
  bool any_psi = false;
  for (const auto& p : sys.psi_cols) any_psi = any_psi || p.state_dim() > 0 || !p.J.isZero(0.0) || !p.by.isZero(0.0);
  if (any_psi) {
    for (std::size_t j = 0; j < sys.psi_cols.size(); ++j) {
      const fs::path p = dir / ("psi_" + std::to_string(j) + ".json");
      write_json_file(p, to_json(sys.psi_cols[j]));
      cfg.psi_files.push_back(p);
    }
  }
  cfg.region = to_json(sys.region);
  cfg.z_star = sys.z_star;
  cfg.u_star = sys.u_star;
  const fs::path config = dir / "config.json";
  write_json_file(config, config_to_json(cfg));
  return config;
}

int cmd_example(const Options& o, std::ostream& out, std::ostream&) {
  const BilinearNfl sys = fixtures::four_dim_system();
  const Mlp net = fixtures::four_dim_network();
  const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, ", ", "\n", "  [", "]");
  out << "l = " << sys.l() << ", m = " << sys.m() << ", k_phi = " << sys.k_phi() << ", k_psi = " << sys.k_psi()
      << ", region: ball of radius 0.08 around 0, z* = 0, u* = 0\n";
  out << "A0 =\n" << sys.A0.format(fmt) << "\nB0 =\n" << sys.B0.format(fmt) << "\nD~ =\n" << sys.Dt.format(fmt) << '\n';
  out << "network: " << net.input_dim() << " -> [10, 10] relu -> " << net.output_dim()
      << ", output at 0 = " << evaluate_mlp(net, Vec::Zero(2)).transpose().format(fmt) << '\n';
  if (o.out_given) {
    const fs::path dir(o.out);
    const fs::path config = write_project(dir, sys);
    write_json_file(dir / "network.json", to_json(net));
    out << "wrote " << config.string() << '\n';
  }
  return Ok;
}

int run(const std::string& command, const Options& o, std::ostream& out, std::ostream& err) {
  try {
    if (command == "convert") return cmd_convert(o, out, err);
    if (command == "synthesize") return cmd_synthesize(o, out, err);
    if (command == "simulate") return cmd_simulate(o, out, err);
    if (command == "verify") return cmd_verify(o, out, err);
    if (command == "example") return cmd_example(o, out, err);
    err << "unknown command '" << command << "'\n";
    return InputError;
  } catch (const ParseError& e) {
    err << "ParseError: " << e.what() << '\n';
    return InputError;
  } catch (const ShapeMismatch& e) {
    err << "ShapeMismatch: " << e.what() << '\n';
    return InputError;
  } catch (const MixedActivation& e) {
    err << "MixedActivation: " << e.what() << '\n';
    return InputError;
  } catch (const UnsupportedSlopeBounds& e) {
    err << "UnsupportedSlopeBounds: " << e.what() << '\n';
    return InputError;
  } catch (const Infeasible& e) {
    err << "Infeasible: " << e.what() << '\n';
    return InfeasibleExit;
  } catch (const NumericalFailure& e) {
    err << "NumericalFailure: " << e.what() << '\n';
    return NumericalExit;
  } catch (const ContainmentViolation& e) {
    err << "ContainmentViolation: " << e.what() << '\n';
    return NumericalExit;
  } catch (const Singular& e) {
    err << "Singular: " << e.what() << '\n';
    return NumericalExit;
  } catch (const NonFinite& e) {
    err << "NonFinite: " << e.what() << '\n';
    return NumericalExit;
  } catch (const NoConvergence& e) {
    err << "NoConvergence: " << e.what() << '\n';
    return NumericalExit;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return InputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return NumericalExit;
  }
}

}  // namespace nfl::cli
