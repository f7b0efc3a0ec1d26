#include "nfl/io.hpp"

#include <fstream>
#include <sstream>

namespace nfl {

namespace {

const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(what + ": missing field '" + key + "'");
  return *it;
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

Index count(const Json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ParseError(what + ": expected a nonnegative integer");
  return static_cast<Index>(j.get<long long>());
}

std::string text(const Json& j, const std::string& what) {
  if (!j.is_string()) throw ParseError(what + ": expected a string");
  return j.get<std::string>();
}

bool flag(const Json& j, const std::string& what) {
  if (!j.is_boolean()) throw ParseError(what + ": expected a boolean");
  return j.get<bool>();
}

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NonFinite(what + ": non-finite value cannot be written");
}

template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

}  // namespace

Json to_json(const Mat& m) {
  Json data = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index k = 0; k < m.cols(); ++k) {
      check_finite(m(i, k), "matrix");
      data.push_back(m(i, k));
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Json to_json(const Vec& v) {
  Json data = Json::array();
  for (Index i = 0; i < v.size(); ++i) {
    check_finite(v(i), "vector");
    data.push_back(v(i));
  }
  return data;
}

Mat mat_from_json(const Json& j, const std::string& what) {
  const Index r = count(field(j, "rows", what), what + ".rows");
  const Index c = count(field(j, "cols", what), what + ".cols");
  const Json& data = field(j, "data", what);
  if (!data.is_array() || static_cast<Index>(data.size()) != r * c) {
    std::ostringstream msg;
    msg << what << ": data must hold rows*cols = " << r * c << " numbers";
    throw ParseError(msg.str());
  }
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k) m(i, k) = number(data[static_cast<std::size_t>(i * c + k)], what);
  return m;
}

Vec vec_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], what);
  return v;
}

Json to_json(const Activation& a) { return {{"name", a.name}, {"alpha", a.alpha}, {"beta", a.beta}}; }

Activation activation_from_json(const Json& j) {
  if (j.is_string()) return Activation::from_name(j.get<std::string>());
  const std::string name = text(field(j, "name", "activation"), "activation.name");
  if (j.contains("alpha") || j.contains("beta")) {
    return Activation::from_name(name, number(field(j, "alpha", "activation"), "activation.alpha"),
                                 number(field(j, "beta", "activation"), "activation.beta"));
  }
  return Activation::from_name(name);
}

Json to_json(const Mlp& mlp) {
  Json layers = Json::array();
  for (const auto& layer : mlp.layers) layers.push_back({{"W", to_json(layer.W)}, {"b", to_json(layer.b)}});
  return {{"type", "mlp"}, {"activation", to_json(mlp.activation)}, {"layers", std::move(layers)}};
}

Json to_json(const Inn& inn) {
  Json blocks = Json::array();
  for (Index b : inn.block_sizes) blocks.push_back(b);
  return {{"type", "inn"},
          {"activation", to_json(inn.activation)},
          {"F", to_json(inn.F)},
          {"G", to_json(inn.G)},
          {"H", to_json(inn.H)},
          {"J", to_json(inn.J)},
          {"b_x", to_json(inn.bx)},
          {"b_y", to_json(inn.by)},
          {"wellposed_by_structure", inn.wellposed_by_structure},
          {"block_sizes", std::move(blocks)}};
}

Mlp mlp_from_json(const Json& j) {
  Mlp mlp;
  mlp.activation = activation_from_json(field(j, "activation", "mlp"));
  const Json& layers = field(j, "layers", "mlp");
  if (!layers.is_array()) throw ParseError("mlp.layers: expected an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string what = "mlp.layers[" + std::to_string(i) + "]";
    mlp.layers.push_back({mat_from_json(field(layers[i], "W", what), what + ".W"),
                          vec_from_json(field(layers[i], "b", what), what + ".b")});
  }
  mlp.validate();
  return mlp;
}

Inn inn_from_json(const Json& j) {
  Inn inn;
  inn.activation = activation_from_json(field(j, "activation", "inn"));
  inn.F = mat_from_json(field(j, "F", "inn"), "inn.F");
  inn.G = mat_from_json(field(j, "G", "inn"), "inn.G");
  inn.H = mat_from_json(field(j, "H", "inn"), "inn.H");
  inn.J = mat_from_json(field(j, "J", "inn"), "inn.J");
  inn.bx = vec_from_json(field(j, "b_x", "inn"), "inn.b_x");
  inn.by = vec_from_json(field(j, "b_y", "inn"), "inn.b_y");
  inn.wellposed_by_structure = j.contains("wellposed_by_structure") &&
                               flag(j["wellposed_by_structure"], "inn.wellposed_by_structure");
  if (j.contains("block_sizes")) {
    const Json& b = j["block_sizes"];
    if (!b.is_array()) throw ParseError("inn.block_sizes: expected an array");
    for (const auto& n : b) inn.block_sizes.push_back(count(n, "inn.block_sizes"));
  }
  inn.validate();
  return inn;
}

Inn network_from_json(const Json& j) {
  const std::string type = text(field(j, "type", "network"), "network.type");
  if (type == "mlp") return mlp_to_inn(mlp_from_json(j));
  if (type == "inn") return inn_from_json(j);
  throw ParseError("network.type must be 'mlp' or 'inn', got '" + type + "'");
}

Json to_json(const RegionZ& r) {
  return {{"Qz", to_json(r.Qz)}, {"Sz", to_json(r.Sz)}, {"Rz", to_json(r.Rz)}, {"center", to_json(r.center)}};
}

RegionZ region_from_json(const Json& j) {
  const Vec center = vec_from_json(field(j, "center", "region"), "region.center");
  RegionZ r;
  if (j.contains("radius")) {
    const double radius = number(j["radius"], "region.radius");
    if (!(radius > 0.0)) throw ParseError("region.radius must be positive");
    r = RegionZ::ball(center, radius);
  } else if (j.contains("shape")) {
    r = RegionZ::ellipsoid(center, mat_from_json(j["shape"], "region.shape"));
  } else {
    r.Qz = mat_from_json(field(j, "Qz", "region"), "region.Qz");
    r.Sz = mat_from_json(field(j, "Sz", "region"), "region.Sz");
    r.Rz = mat_from_json(field(j, "Rz", "region"), "region.Rz");
    r.center = center;
  }
  r.validate();
  return r;
}

Json to_json(const SynthesisResult& r) {
  const SdpSettings& s = r.sdp;
  return {
      {"format", "nfl-synthesis-result"},
      {"dims", {{"l", r.dims.l}, {"m", r.dims.m}, {"k_phi", r.dims.k_phi}, {"k_psi", r.dims.k_psi}}},
      {"slope_bounds", {{"alpha", r.alpha}, {"beta", r.beta}}},
      {"reduced", r.reduced},
      {"status", r.status},
      {"sdp_status", r.sdp_status},
      {"phase", r.phase},
      {"iterations", r.iterations},
      {"options",
       {{"eps", r.eps},
        {"objective", r.objective},
        {"multiplier", r.multiplier},
        {"backend", r.backend},
        {"sdp", {{"max_iter", s.max_iter}, {"gap_tol", s.gap_tol}, {"feas_tol", s.feas_tol}, {"step", s.step_factor}}}}},
      {"residuals", {{"left_min_eig", r.left_min_eig}, {"right_max_eig", r.right_max_eig}}},
      {"trace_P", r.trace_P},
      {"P", to_json(r.P)},
      {"gains",
       {{"K_z", to_json(r.Kz)},
        {"K_u", to_json(r.Ku)},
        {"K_wpsi", to_json(r.Kw)},
        {"K_phi", to_json(r.Kphi)},
        {"K_psi", to_json(r.Kpsi)}}},
      {"L",
       {{"L_z", to_json(r.Lz)},
        {"L_u", to_json(r.Lu)},
        {"L_wpsi", to_json(r.Lw)},
        {"L_phi", to_json(r.Lphi)},
        {"L_psi", to_json(r.Lpsi)}}},
      {"multipliers",
       {{"Lambda_m", to_json(r.Lambda_m_t)},
        {"Lambda_kpsi", to_json(r.Lambda_k_t)},
        {"T_kphi", to_json(r.T_phi_t)},
        {"T_lkpsi", to_json(r.T_psi_t)},
        {"nu", r.nu}}},
  };
}

SynthesisResult result_from_json(const Json& j) {
  const std::string what = "result";
  if (text(field(j, "format", what), "result.format") != "nfl-synthesis-result") {
    throw ParseError("result.format: not a synthesis result file");
  }
  SynthesisResult r;
  const Json& d = field(j, "dims", what);
  r.dims = {count(field(d, "l", "dims"), "dims.l"), count(field(d, "m", "dims"), "dims.m"),
            count(field(d, "k_phi", "dims"), "dims.k_phi"), count(field(d, "k_psi", "dims"), "dims.k_psi")};
  const Json& sb = field(j, "slope_bounds", what);
  r.alpha = number(field(sb, "alpha", "slope_bounds"), "slope_bounds.alpha");
  r.beta = number(field(sb, "beta", "slope_bounds"), "slope_bounds.beta");
  r.reduced = flag(field(j, "reduced", what), "result.reduced");
  r.status = text(field(j, "status", what), "result.status");
  r.sdp_status = text(field(j, "sdp_status", what), "result.sdp_status");
  r.phase = text(field(j, "phase", what), "result.phase");
  r.iterations = static_cast<int>(count(field(j, "iterations", what), "result.iterations"));
  const Json& o = field(j, "options", what);
  r.eps = number(field(o, "eps", "options"), "options.eps");
  r.objective = text(field(o, "objective", "options"), "options.objective");
  r.multiplier = text(field(o, "multiplier", "options"), "options.multiplier");
  r.backend = text(field(o, "backend", "options"), "options.backend");
  const Json& s = field(o, "sdp", "options");
  r.sdp.max_iter = static_cast<int>(count(field(s, "max_iter", "sdp"), "sdp.max_iter"));
  r.sdp.gap_tol = number(field(s, "gap_tol", "sdp"), "sdp.gap_tol");
  r.sdp.feas_tol = number(field(s, "feas_tol", "sdp"), "sdp.feas_tol");
  r.sdp.step_factor = number(field(s, "step", "sdp"), "sdp.step");
  const Json& res = field(j, "residuals", what);
  r.left_min_eig = number(field(res, "left_min_eig", "residuals"), "residuals.left_min_eig");
  r.right_max_eig = number(field(res, "right_max_eig", "residuals"), "residuals.right_max_eig");
  r.trace_P = number(field(j, "trace_P", what), "result.trace_P");
  r.P = mat_from_json(field(j, "P", what), "result.P");
  const Json& g = field(j, "gains", what);
  r.Kz = mat_from_json(field(g, "K_z", "gains"), "gains.K_z");
  r.Ku = mat_from_json(field(g, "K_u", "gains"), "gains.K_u");
  r.Kw = mat_from_json(field(g, "K_wpsi", "gains"), "gains.K_wpsi");
  r.Kphi = mat_from_json(field(g, "K_phi", "gains"), "gains.K_phi");
  r.Kpsi = mat_from_json(field(g, "K_psi", "gains"), "gains.K_psi");
  const Json& L = field(j, "L", what);
  r.Lz = mat_from_json(field(L, "L_z", "L"), "L.L_z");
  r.Lu = mat_from_json(field(L, "L_u", "L"), "L.L_u");
  r.Lw = mat_from_json(field(L, "L_wpsi", "L"), "L.L_wpsi");
  r.Lphi = mat_from_json(field(L, "L_phi", "L"), "L.L_phi");
  r.Lpsi = mat_from_json(field(L, "L_psi", "L"), "L.L_psi");
  const Json& mlt = field(j, "multipliers", what);
  r.Lambda_m_t = mat_from_json(field(mlt, "Lambda_m", "multipliers"), "multipliers.Lambda_m");
  r.Lambda_k_t = mat_from_json(field(mlt, "Lambda_kpsi", "multipliers"), "multipliers.Lambda_kpsi");
  r.T_phi_t = vec_from_json(field(mlt, "T_kphi", "multipliers"), "multipliers.T_kphi");
  r.T_psi_t = vec_from_json(field(mlt, "T_lkpsi", "multipliers"), "multipliers.T_lkpsi");
  r.nu = number(field(mlt, "nu", "multipliers"), "multipliers.nu");

  const LfrDims& dm = r.dims;
  const auto q = dm.q_sizes();
  require_shape(r.P, dm.l, dm.l, "result P");
  require_shape(r.Kz, dm.m, dm.l, "result K_z");
  require_shape(r.Ku, dm.m, q[0], "result K_u");
  require_shape(r.Kw, dm.m, q[1], "result K_wpsi");
  require_shape(r.Kphi, dm.m, q[2], "result K_phi");
  require_shape(r.Kpsi, dm.m, q[3], "result K_psi");
  return r;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

ProjectConfig load_config(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  ProjectConfig c;
  c.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const std::string what = "config";
  try {
    c.plant_file = resolve(c.base_dir, text(field(j, "plant", what), "config.plant"));
    if (j.contains("phi")) c.phi_file = resolve(c.base_dir, text(j["phi"], "config.phi"));
    if (j.contains("psi")) {
      if (!j["psi"].is_array()) throw ParseError("config.psi: expected an array of paths");
      for (const auto& p : j["psi"]) c.psi_files.push_back(resolve(c.base_dir, text(p, "config.psi")));
    }
    c.region = field(j, "region", what);
    const Json& eq = field(j, "equilibrium", what);
    c.z_star = vec_from_json(field(eq, "z_star", "equilibrium"), "equilibrium.z_star");
    c.u_star = vec_from_json(field(eq, "u_star", "equilibrium"), "equilibrium.u_star");
    if (j.contains("synthesis")) {
      const Json& s = j["synthesis"];
      c.synthesis.eps = value_or(s, "eps", c.synthesis.eps);
      c.synthesis.positivity_floor = value_or(s, "positivity_floor", c.synthesis.positivity_floor);
      if (s.contains("objective")) c.synthesis.objective = objective_from_string(text(s["objective"], "objective"));
      if (s.contains("multiplier")) {
        c.synthesis.multiplier = multiplier_class_from_string(text(s["multiplier"], "multiplier"));
      }
      if (s.contains("sdp")) {
        const Json& d = s["sdp"];
        c.synthesis.sdp.max_iter = value_or(d, "max_iter", c.synthesis.sdp.max_iter);
        c.synthesis.sdp.gap_tol = value_or(d, "gap_tol", c.synthesis.sdp.gap_tol);
        c.synthesis.sdp.feas_tol = value_or(d, "feas_tol", c.synthesis.sdp.feas_tol);
        c.synthesis.sdp.step_factor = value_or(d, "step", c.synthesis.sdp.step_factor);
      }
    }
    if (j.contains("simulation")) {
      const Json& s = j["simulation"];
      c.simulation.horizon = value_or(s, "horizon", c.simulation.horizon);
      c.simulation.initial_conditions = value_or(s, "initial_conditions", c.simulation.initial_conditions);
      c.simulation.seed = value_or(s, "seed", c.simulation.seed);
      if (s.contains("initial_states")) {
        for (const auto& z : s["initial_states"]) c.simulation.initial_states.push_back(vec_from_json(z, "initial_states"));
      }
    }
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (c.synthesis.eps <= 0.0) throw ParseError("config.synthesis.eps must be positive");
  if (c.simulation.horizon < 1) throw ParseError("config.simulation.horizon must be at least 1");
  for (const auto& p : c.psi_files) {
    if (!std::filesystem::exists(p)) throw ParseError("referenced file does not exist: " + p.string());
  }
  if (!std::filesystem::exists(c.plant_file)) throw ParseError("referenced file does not exist: " + c.plant_file.string());
  if (c.phi_file && !std::filesystem::exists(*c.phi_file)) {
    throw ParseError("referenced file does not exist: " + c.phi_file->string());
  }
  return c;
}

BilinearNfl ProjectConfig::load_system() const {
  const Json plant = read_json_file(plant_file);
  BilinearNfl s;
  s.A0 = mat_from_json(field(plant, "A0", "plant"), "plant.A0");
  s.B0 = mat_from_json(field(plant, "B0", "plant"), "plant.B0");
  const Index l = s.A0.rows(), m = s.B0.cols();
  s.Dt = plant.contains("Dt") ? mat_from_json(plant["Dt"], "plant.Dt") : Mat(Mat::Zero(l, l * m));
  s.phi = phi_file ? network_from_json(read_json_file(*phi_file)) : Inn::zero(m, l);
  if (psi_files.empty()) {
    s.psi_cols.assign(static_cast<std::size_t>(l), Inn::zero(m, l));
  } else {
    for (const auto& p : psi_files) s.psi_cols.push_back(network_from_json(read_json_file(p)));
  }
  // Stateless networks take the shared activation so the mixed-activation check only sees real ones.
  const Activation act = s.activation();
  if (s.phi.state_dim() == 0) s.phi.activation = act;
  for (auto& p : s.psi_cols)
    if (p.state_dim() == 0) p.activation = act;
  s.z_star = z_star;
  s.u_star = u_star;
  s.region = region_from_json(region);
  s.validate();
  return s;
}

Json config_to_json(const ProjectConfig& c) {
  auto rel = [&](const std::filesystem::path& p) { return p.lexically_relative(c.base_dir).generic_string(); };
  Json j;
  j["plant"] = rel(c.plant_file);
  if (c.phi_file) j["phi"] = rel(*c.phi_file);
  if (!c.psi_files.empty()) {
    j["psi"] = Json::array();
    for (const auto& p : c.psi_files) j["psi"].push_back(rel(p));
  }
  j["region"] = c.region;
  j["equilibrium"] = {{"z_star", to_json(c.z_star)}, {"u_star", to_json(c.u_star)}};
  const SynthesisOptions& s = c.synthesis;
  j["synthesis"] = {{"eps", s.eps},
                    {"objective", to_string(s.objective)},
                    {"multiplier", to_string(s.multiplier)},
                    {"positivity_floor", s.positivity_floor},
                    {"sdp",
                     {{"max_iter", s.sdp.max_iter},
                      {"gap_tol", s.sdp.gap_tol},
                      {"feas_tol", s.sdp.feas_tol},
                      {"step", s.sdp.step_factor}}}};
  Json starts = Json::array();
  for (const auto& z : c.simulation.initial_states) starts.push_back(to_json(z));
  j["simulation"] = {{"horizon", c.simulation.horizon},
                     {"initial_conditions", c.simulation.initial_conditions},
                     {"seed", c.simulation.seed},
                     {"initial_states", std::move(starts)}};
  return j;
}

}  // namespace nfl
