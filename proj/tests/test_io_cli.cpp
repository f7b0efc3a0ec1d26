#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "nfl/cli.hpp"
#include "nfl/fixtures.hpp"
#include "nfl/io.hpp"
#include "nfl/synthesis.hpp"
#include "support.hpp"

using namespace nfl;
namespace fs = std::filesystem;

namespace {

const fs::path kData = NFL_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nfl_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::string& cmd, cli::Options o) {
  std::ostringstream out, err;
  const int code = cli::run(cmd, o, out, err);
  return {code, out.str(), err.str()};
}

cli::Options project(const fs::path& config, const fs::path& out) {
  cli::Options o;
  o.config = config.string();
  o.out = out.string();
  o.out_given = true;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Json reparse(const Json& j) { return Json::parse(j.dump()); }

bool same(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("matrices round-trip bitwise") {
  nfl::testing::Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    Mat m = rng.mat(rng.integer(1, 5), rng.integer(1, 5));
    m(0, 0) = std::ldexp(rng.uniform(), -40);
    m(m.rows() - 1, m.cols() - 1) = 1.0 / 3.0;
    CHECK(same(mat_from_json(reparse(to_json(m)), "m"), m));
    const Vec v = rng.vec(4, 1e6);
    CHECK(same(vec_from_json(reparse(to_json(v)), "v"), v));
  }
  CHECK(same(mat_from_json(reparse(to_json(Mat(Mat::Zero(0, 3)))), "empty"), Mat::Zero(0, 3)));
}

TEST_CASE("networks round-trip bitwise") {
  nfl::testing::Rng rng(2);
  const Mlp mlp = nfl::testing::random_mlp(rng, 2, {3, 4}, 2, Activation::tanh());
  const Mlp back = mlp_from_json(reparse(to_json(mlp)));
  REQUIRE(back.layers.size() == mlp.layers.size());
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    CHECK(same(back.layers[i].W, mlp.layers[i].W));
    CHECK(same(back.layers[i].b, mlp.layers[i].b));
  }
  CHECK(back.activation.name == "tanh");
  const Inn inn = mlp_to_inn(mlp);
  const Inn ib = inn_from_json(reparse(to_json(inn)));
  CHECK(same(ib.F, inn.F));
  CHECK(same(ib.G, inn.G));
  CHECK(same(ib.H, inn.H));
  CHECK(same(ib.J, inn.J));
  CHECK(same(ib.bx, inn.bx));
  CHECK(same(ib.by, inn.by));
  CHECK(ib.block_sizes == inn.block_sizes);
}

TEST_CASE("synthesis results round-trip bitwise") {
  const SynthesisResult r = synthesize(fixtures::soundness_plants()[2].sys);
  const SynthesisResult b = result_from_json(reparse(to_json(r)));
  for (auto [x, y] : {std::pair{&r.P, &b.P}, {&r.Kz, &b.Kz}, {&r.Ku, &b.Ku}, {&r.Kw, &b.Kw}, {&r.Kphi, &b.Kphi},
                      {&r.Kpsi, &b.Kpsi}, {&r.Lz, &b.Lz}, {&r.Lu, &b.Lu}, {&r.Lambda_m_t, &b.Lambda_m_t},
                      {&r.Lambda_k_t, &b.Lambda_k_t}})
    CHECK(same(*x, *y));
  CHECK(same(r.T_phi_t, b.T_phi_t));
  CHECK(same(r.T_psi_t, b.T_psi_t));
  CHECK(r.nu == b.nu);
  CHECK(r.left_min_eig == b.left_min_eig);
  CHECK(r.status == b.status);
  CHECK(to_json(b).dump() == to_json(r).dump());
}

TEST_CASE("checked-in example matches the built-in fixture") {
  const BilinearNfl a = load_config(kData / "four_dim" / "config.json").load_system();
  const BilinearNfl b = fixtures::four_dim_system();
  CHECK(same(a.A0, b.A0));
  CHECK(same(a.B0, b.B0));
  CHECK(same(a.Dt, b.Dt));
  nfl::testing::Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Vec z = rng.vec(4, 0.08), u = rng.vec(2, 2.0);
    CHECK((step_direct(a, z, u) - step_direct(b, z, u)).cwiseAbs().maxCoeff() == 0.0);
  }
  const Mlp net = mlp_from_json(read_json_file(kData / "networks" / "mlp_10_10.json"));
  const Mlp ref = fixtures::four_dim_network();
  for (std::size_t i = 0; i < ref.layers.size(); ++i) CHECK(same(net.layers[i].W, ref.layers[i].W));
}

TEST_CASE("convert") {
  const fs::path dir = scratch("convert");
  SUBCASE("single hidden layer has no internal coupling") {
    cli::Options o;
    o.input = (kData / "networks" / "single_layer.json").string();
    o.output = (dir / "single.json").string();
    const Run r = run("convert", o);
    CHECK(r.code == 0);
    CHECK(r.out.find("k = 3") != std::string::npos);
    const Inn inn = inn_from_json(read_json_file(dir / "single.json"));
    CHECK(inn.F.isZero(0.0));
    const Mlp mlp = mlp_from_json(read_json_file(kData / "networks" / "single_layer.json"));
    Vec u(2);
    u << 0.3, -0.7;
    CHECK((evaluate_inn(inn, u).y - evaluate_mlp(mlp, u)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("two hidden layers of ten") {
    cli::Options o;
    o.input = (kData / "networks" / "mlp_10_10.json").string();
    o.out = dir.string();
    const Run r = run("convert", o);
    CHECK(r.code == 0);
    CHECK(r.out.find("k = 20") != std::string::npos);
    CHECK(r.out.find("strictly upper block triangular: yes") != std::string::npos);
  }
  SUBCASE("malformed file") {
    cli::Options o;
    o.input = (kData / "networks" / "malformed.json").string();
    o.out = dir.string();
    const Run r = run("convert", o);
    CHECK(r.code == 2);
    CHECK(r.err.find("ParseError") != std::string::npos);
  }
  SUBCASE("missing file") {
    cli::Options o;
    o.input = (dir / "nope.json").string();
    CHECK(run("convert", o).code == 2);
  }
}

TEST_CASE("synthesize exit codes") {
  const fs::path dir = scratch("synth");
  const Run ok = run("synthesize", project(kData / "linear_toy" / "config.json", dir / "linear"));
  CHECK(ok.code == 0);
  CHECK(fs::exists(dir / "linear" / "result.json"));
  const Run bad = run("synthesize", project(kData / "unstabilizable" / "config.json", dir / "unstab"));
  CHECK(bad.code == 3);
  CHECK(bad.err.find("Infeasible") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "unstab" / "result.json"));
  cli::Options missing = project(dir / "absent.json", dir);
  CHECK(run("synthesize", missing).code == 2);
}

TEST_CASE("reruns write identical result files") {
  const fs::path dir = scratch("rerun");
  const fs::path cfg = kData / "network_dominant" / "config.json";
  REQUIRE(run("synthesize", project(cfg, dir / "a")).code == 0);
  REQUIRE(run("synthesize", project(cfg, dir / "b")).code == 0);
  CHECK(slurp(dir / "a" / "result.json") == slurp(dir / "b" / "result.json"));
}

TEST_CASE("simulate marks uncertified starts and compares with the baseline") {
  const fs::path dir = scratch("simulate");
  const fs::path src = kData / "network_dominant";
  fs::copy(src, dir / "proj");
  Json cfg = read_json_file(dir / "proj" / "config.json");
  cfg["simulation"]["initial_states"] = Json::array({to_json(Vec(Vec::Constant(1, -0.5))), to_json(Vec(Vec::Constant(1, 1.5)))});
  cfg["simulation"]["initial_conditions"] = 3;
  write_json_file(dir / "proj" / "config.json", cfg);
  cli::Options o = project(dir / "proj" / "config.json", dir / "out");
  REQUIRE(run("synthesize", o).code == 0);
  o.baseline = true;
  const Run r = run("simulate", o);
  CHECK(r.code == 0);
  const Json rep = read_json_file(dir / "out" / "simulation_report.json");
  CHECK(rep["trajectories"] == 5);
  CHECK(rep["certified_decrease_violations"] == 0);
  CHECK(rep["certified_region_exits"] == 0);
  CHECK(rep["runs"][0]["certified_start"] == true);
  CHECK(rep["runs"][1]["certified_start"] == false);
  CHECK(rep["uncertified_starts"] == 1);
  CHECK(rep["baseline"]["comparison"][0]["baseline_worse"] == true);
  CHECK(rep["baseline"]["baseline_region_exit_count"].get<int>() >= 1);
  for (int i = 0; i < 5; ++i) {
    CHECK(fs::exists(dir / "out" / ("traj_00" + std::to_string(i) + ".csv")));
    CHECK(fs::exists(dir / "out" / ("baseline_00" + std::to_string(i) + ".csv")));
  }
}

TEST_CASE("verify catches injected faults") {
  const fs::path dir = scratch("verify");
  fs::copy(kData / "network_dominant", dir / "proj");
  const fs::path cfg = dir / "proj" / "config.json";
  cli::Options o = project(cfg, dir / "out");
  REQUIRE(run("synthesize", o).code == 0);

  const Run fresh = run("verify", o);
  CHECK(fresh.code == 0);
  CHECK(fresh.out.find("FAIL") == std::string::npos);

  SUBCASE("inflated P") {
    Json res = read_json_file(dir / "out" / "result.json");
    SynthesisResult r = result_from_json(res);
    r.P *= 2.0;
    write_json_file(dir / "out" / "bad.json", to_json(r));
    o.result = (dir / "out" / "bad.json").string();
    const Run v = run("verify", o);
    CHECK(v.code == 1);
    const bool flagged = v.out.find("FAIL lmi") != std::string::npos || v.out.find("FAIL roa") != std::string::npos;
    CHECK(flagged);
  }
  SUBCASE("wrong slope bounds") {
    Json phi = read_json_file(dir / "proj" / "phi.json");
    phi["activation"]["beta"] = 0.5;
    write_json_file(dir / "proj" / "phi.json", phi);
    const Run v = run("verify", o);
    CHECK(v.code == 1);
    CHECK(v.out.find("FAIL delta-qc") != std::string::npos);
  }
}

TEST_CASE("example writes a loadable project") {
  const fs::path dir = scratch("example");
  cli::Options o;
  o.out = dir.string();
  o.out_given = true;
  CHECK(run("example", o).code == 0);
  const BilinearNfl s = load_config(dir / "config.json").load_system();
  CHECK(s.k_psi() == 20);
  CHECK(same(s.A0, fixtures::four_dim_system().A0));
}

TEST_CASE("config validation") {
  const fs::path dir = scratch("config");
  fs::copy(kData / "linear_toy", dir / "proj");
  Json cfg = read_json_file(dir / "proj" / "config.json");
  cfg["region"]["radius"] = -1.0;
  write_json_file(dir / "proj" / "bad_radius.json", cfg);
  CHECK(run("synthesize", project(dir / "proj" / "bad_radius.json", dir / "o")).code == 2);
  cfg = read_json_file(dir / "proj" / "config.json");
  cfg["equilibrium"]["z_star"] = Json::array({0.0});
  write_json_file(dir / "proj" / "bad_eq.json", cfg);
  CHECK(run("synthesize", project(dir / "proj" / "bad_eq.json", dir / "o")).code == 2);
  cfg = read_json_file(dir / "proj" / "config.json");
  cfg["plant"] = "missing.json";
  write_json_file(dir / "proj" / "bad_plant.json", cfg);
  CHECK(run("synthesize", project(dir / "proj" / "bad_plant.json", dir / "o")).code == 2);
}

TEST_CASE("command-line binary") {
  const fs::path dir = scratch("binary");
  const std::string cli = NFL_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status("synthesize --config " + (kData / "linear_toy" / "config.json").string() + " --out " + dir.string()) == 0);
  CHECK(status("verify --config " + (kData / "linear_toy" / "config.json").string() + " --out " + dir.string()) == 0);
  CHECK(status("synthesize --config " + (kData / "unstabilizable" / "config.json").string() + " --out " + dir.string()) == 3);
  CHECK(status("synthesize --multiplier bogus --config " + (kData / "linear_toy" / "config.json").string()) == 2);
  CHECK(status("convert " + (kData / "networks" / "malformed.json").string()) == 2);
  CHECK(status("no-such-command") == 2);
  CHECK(::setenv("NFL_SYNTH_BACKEND", "nonexistent", 1) == 0);
  CHECK(status("synthesize --config " + (kData / "linear_toy" / "config.json").string() + " --out " + dir.string()) == 2);
  ::unsetenv("NFL_SYNTH_BACKEND");
}
