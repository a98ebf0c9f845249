#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pvvs/harness.hpp"

namespace pvvs {

namespace {

using nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Infinite values are written as null; `null_as` gives their meaning on read.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class M>
json mat(const M& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

template <class V>
json vec(const V& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error("config", key + ": " + what);
}

double to_num(const json& j, const std::string& key, double null_as = std::nan("")) {
  if (j.is_null()) {
    if (std::isnan(null_as)) bad(key, "null is not allowed here");
    return null_as;
  }
  if (!j.is_number()) bad(key, "expected a number");
  return j.get<double>();
}

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_, "expected an object");
  }
  ~Reader() = default;

  bool has(const char* key) const { return j_.contains(key); }
  std::string key(const char* k) const { return path_.empty() ? k : path_ + "." + k; }
  Reader sub(const char* k) const { return Reader(j_.at(k), key(k)); }

  void get(const char* k, double& out, double null_as = std::nan("")) const {
    if (has(k)) out = to_num(j_.at(k), key(k), null_as);
  }
  void get(const char* k, int& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_number_integer()) bad(key(k), "expected an integer");
    out = j_.at(k).get<int>();
  }
  void get(const char* k, std::uint64_t& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_number_unsigned() && !j_.at(k).is_number_integer()) bad(key(k), "expected an integer");
    if (j_.at(k).is_number_integer() && j_.at(k).get<std::int64_t>() < 0) bad(key(k), "must be >= 0");
    out = j_.at(k).get<std::uint64_t>();
  }
  void get(const char* k, unsigned& out) const {
    std::uint64_t v = out;
    get(k, v);
    out = static_cast<unsigned>(v);
  }
  void get(const char* k, bool& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_boolean()) bad(key(k), "expected true or false");
    out = j_.at(k).get<bool>();
  }
  void get(const char* k, std::string& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_string()) bad(key(k), "expected a string");
    out = j_.at(k).get<std::string>();
  }
  template <class V>
  void get_vec(const char* k, V& out, double null_as = std::nan("")) const {
    if (!has(k)) return;
    const json& a = j_.at(k);
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != out.size()) {
      bad(key(k), "expected an array of " + std::to_string(out.size()) + " numbers");
    }
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = to_num(a[i], key(k), null_as);
  }
  template <class M>
  void get_mat(const char* k, M& out) const {
    if (!has(k)) return;
    const json& a = j_.at(k);
    const std::string shape = std::to_string(out.rows()) + "x" + std::to_string(out.cols());
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != out.rows()) bad(key(k), "expected a " + shape + " matrix");
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const json& row = a[i];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != out.cols()) bad(key(k), "expected a " + shape + " matrix");
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(i, c) = to_num(row[c], key(k));
    }
  }
  // Bounds: null stands for -inf in *_min and +inf in *_max.
  template <class V>
  void get_bounds(const char* k, V& out, double null_as) const { get_vec(k, out, null_as); }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (const auto& [name, value] : j_.items()) {
      bool ok = false;
      for (const char* kk : known) ok |= name == kk;
      if (!ok) bad(path_.empty() ? name : path_ + "." + name, "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
};

}  // namespace

std::string config_to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["mode"] = std::string(to_string(c.mode));
  j["clamp_altitude_reference"] = c.clamp_altitude_reference;
  j["duration"] = c.duration;
  j["control_period"] = c.control_period;
  j["plant_substeps"] = c.plant_substeps;
  j["seed"] = c.seed;
  j["model_mismatch"] = c.model_mismatch;
  j["scene"] = {{"origin", vec(c.scene.origin)},
                {"direction", vec(c.scene.direction)},
                {"panel_count", c.scene.panel_count},
                {"panel_length", c.scene.panel_length},
                {"panel_width", c.scene.panel_width},
                {"edge_thickness", c.scene.edge_thickness},
                {"array_z", c.scene.array_z},
                {"ground_z", c.scene.ground_z}};
  j["rig"] = {{"t_bc", vec(c.rig.t_bc)},
              {"R_bc", mat(c.rig.R_bc)},
              {"lambda", c.rig.lambda},
              {"image_width", c.rig.image_width},
              {"image_height", c.rig.image_height}};
  j["dynamics"] = {{"pi", c.dyn.pi()}};
  j["vs"] = {{"K", mat(c.gains.K)},
             {"W", mat(c.gains.W)},
             {"k1", c.gains.k1},
             {"k2", c.gains.k2},
             {"v_x_max", c.gains.v_x_max},
             {"eta_zd", c.gains.eta_zd},
             {"eta_zd_rate", c.gains.eta_zd_rate},
             {"xi_d", {{"r", c.gains.xi_d.r}, {"theta", c.gains.xi_d.theta}}},
             {"xi_d_rate", vec(c.gains.xi_d_rate)}};
  j["nmpc"] = {{"N", c.nmpc.N},
               {"dt", c.nmpc.dt},
               {"Q", mat(c.nmpc.Q)},
               {"R", mat(c.nmpc.R)},
               {"x_min", vec(c.nmpc.x_min)},
               {"x_max", vec(c.nmpc.x_max)},
               {"u_min", vec(c.nmpc.u_min)},
               {"u_max", vec(c.nmpc.u_max)},
               {"steady_state_reference", c.nmpc.steady_state_reference},
               {"max_iterations", c.nmpc.max_iterations},
               {"kkt_tol", c.nmpc.kkt_tol}};
  const Vec8 x0 = c.initial.vec();
  j["initial"] = {{"x", x0(0)},  {"y", x0(1)},  {"z", x0(2)},  {"psi", x0(3)},
                  {"vx", x0(4)}, {"vy", x0(5)}, {"vz", x0(6)}, {"wz", x0(7)}};
  j["noise"] = {{"enabled", c.noise.enabled},   {"pose_mean", c.noise.pose_mean},
                {"pose_std", c.noise.pose_std}, {"vel_mean", c.noise.vel_mean},
                {"vel_std", c.noise.vel_std}};
  j["extractor"] = {{"depth_min", c.extractor.depth_min},
                    {"depth_max", c.extractor.depth_max},
                    {"min_pixels", c.extractor.min_pixels},
                    {"min_separation_px", c.extractor.min_separation_px},
                    {"open_radius", c.extractor.open_radius}};
  j["estimator"] = {{"Q", mat(c.estimator.Q)},
                    {"R", mat(c.estimator.R)},
                    {"P0", mat(c.estimator.P0)},
                    {"dropout_horizon", c.estimator.dropout_horizon}};
  j["midline"] = {{"spread", c.midline.spread}, {"border_px", c.midline.border_px}};
  j["excitation"] = {{"duration", c.excitation.duration},
                     {"dt", c.excitation.dt},
                     {"start_x", c.excitation.start_x},
                     {"attitude_amplitude", c.excitation.attitude_amplitude},
                     {"seed", c.excitation.seed}};
  return j.dump(2) + "\n";
}

ScenarioConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("config", std::string("malformed JSON: ") + e.what());
  }
  const Reader root(j, "");
  root.reject_unknown({"preset", "name", "mode", "duration", "control_period", "plant_substeps",
                       "seed", "model_mismatch", "clamp_altitude_reference", "scene", "rig", "dynamics", "vs", "nmpc",
                       "initial", "noise", "extractor", "estimator", "midline", "excitation"});
  ScenarioConfig c;
  if (root.has("preset")) {
    std::string preset;
    root.get("preset", preset);
    c = experiment_presets(preset).front();
  }
  root.get("name", c.name);
  if (root.has("mode")) {
    std::string mode;
    root.get("mode", mode);
    c.mode = parse_mode(mode);
  }
  root.get("clamp_altitude_reference", c.clamp_altitude_reference);
  root.get("duration", c.duration);
  root.get("control_period", c.control_period);
  root.get("plant_substeps", c.plant_substeps);
  root.get("seed", c.seed);
  root.get("model_mismatch", c.model_mismatch);

  if (root.has("scene")) {
    const Reader r = root.sub("scene");
    r.reject_unknown({"origin", "direction", "panel_count", "panel_length", "panel_width",
                      "edge_thickness", "array_z", "ground_z"});
    r.get_vec("origin", c.scene.origin);
    r.get_vec("direction", c.scene.direction);
    r.get("panel_count", c.scene.panel_count);
    r.get("panel_length", c.scene.panel_length);
    r.get("panel_width", c.scene.panel_width);
    r.get("edge_thickness", c.scene.edge_thickness);
    r.get("array_z", c.scene.array_z);
    r.get("ground_z", c.scene.ground_z);
  }
  if (root.has("rig")) {
    const Reader r = root.sub("rig");
    r.reject_unknown({"t_bc", "R_bc", "lambda", "image_width", "image_height"});
    r.get_vec("t_bc", c.rig.t_bc);
    r.get_mat("R_bc", c.rig.R_bc);
    r.get("lambda", c.rig.lambda);
    r.get("image_width", c.rig.image_width);
    r.get("image_height", c.rig.image_height);
  }
  if (root.has("dynamics")) {
    const Reader r = root.sub("dynamics");
    r.reject_unknown({"pi"});
    Eigen::Matrix<double, DynParams::kCount, 1> p;
    for (int i = 0; i < DynParams::kCount; ++i) p(i) = c.dyn.pi()[i];
    r.get_vec("pi", p);
    DynParams::Array a;
    for (int i = 0; i < DynParams::kCount; ++i) a[i] = p(i);
    c.dyn = DynParams(a);
  }
  if (root.has("vs")) {
    const Reader r = root.sub("vs");
    r.reject_unknown({"K", "W", "k1", "k2", "v_x_max", "eta_zd", "eta_zd_rate", "xi_d", "xi_d_rate"});
    r.get_mat("K", c.gains.K);
    r.get_mat("W", c.gains.W);
    r.get("k1", c.gains.k1);
    r.get("k2", c.gains.k2);
    r.get("v_x_max", c.gains.v_x_max);
    r.get("eta_zd", c.gains.eta_zd);
    r.get("eta_zd_rate", c.gains.eta_zd_rate);
    if (r.has("xi_d")) {
      const Reader x = r.sub("xi_d");
      x.reject_unknown({"r", "theta"});
      x.get("r", c.gains.xi_d.r);
      x.get("theta", c.gains.xi_d.theta);
    }
    r.get_vec("xi_d_rate", c.gains.xi_d_rate);
  }
  if (root.has("nmpc")) {
    const Reader r = root.sub("nmpc");
    r.reject_unknown({"N", "dt", "Q", "R", "x_min", "x_max", "u_min", "u_max",
                      "steady_state_reference", "max_iterations", "kkt_tol"});
    r.get("N", c.nmpc.N);
    r.get("dt", c.nmpc.dt);
    r.get_mat("Q", c.nmpc.Q);
    r.get_mat("R", c.nmpc.R);
    r.get_bounds("x_min", c.nmpc.x_min, -kInf);
    r.get_bounds("x_max", c.nmpc.x_max, kInf);
    r.get_vec("u_min", c.nmpc.u_min);
    r.get_vec("u_max", c.nmpc.u_max);
    r.get("steady_state_reference", c.nmpc.steady_state_reference);
    r.get("max_iterations", c.nmpc.max_iterations);
    r.get("kkt_tol", c.nmpc.kkt_tol);
  }
  if (root.has("initial")) {
    const Reader r = root.sub("initial");
    r.reject_unknown({"x", "y", "z", "psi", "vx", "vy", "vz", "wz"});
    r.get("x", c.initial.pose.x);
    r.get("y", c.initial.pose.y);
    r.get("z", c.initial.pose.z);
    r.get("psi", c.initial.pose.psi);
    r.get("vx", c.initial.vel.vx);
    r.get("vy", c.initial.vel.vy);
    r.get("vz", c.initial.vel.vz);
    r.get("wz", c.initial.vel.wz);
  }
  if (root.has("noise")) {
    const Reader r = root.sub("noise");
    r.reject_unknown({"enabled", "pose_mean", "pose_std", "vel_mean", "vel_std"});
    r.get("enabled", c.noise.enabled);
    r.get("pose_mean", c.noise.pose_mean);
    r.get("pose_std", c.noise.pose_std);
    r.get("vel_mean", c.noise.vel_mean);
    r.get("vel_std", c.noise.vel_std);
  }
  if (root.has("extractor")) {
    const Reader r = root.sub("extractor");
    r.reject_unknown({"depth_min", "depth_max", "min_pixels", "min_separation_px", "open_radius"});
    r.get("depth_min", c.extractor.depth_min);
    r.get("depth_max", c.extractor.depth_max, kInf);
    r.get("min_pixels", c.extractor.min_pixels);
    r.get("min_separation_px", c.extractor.min_separation_px);
    r.get("open_radius", c.extractor.open_radius);
  }
  if (root.has("estimator")) {
    const Reader r = root.sub("estimator");
    r.reject_unknown({"Q", "R", "P0", "dropout_horizon"});
    r.get_mat("Q", c.estimator.Q);
    r.get_mat("R", c.estimator.R);
    r.get_mat("P0", c.estimator.P0);
    r.get("dropout_horizon", c.estimator.dropout_horizon);
  }
  if (root.has("midline")) {
    const Reader r = root.sub("midline");
    r.reject_unknown({"spread", "border_px"});
    r.get("spread", c.midline.spread);
    r.get("border_px", c.midline.border_px);
  }
  if (root.has("excitation")) {
    const Reader r = root.sub("excitation");
    r.reject_unknown({"duration", "dt", "start_x", "attitude_amplitude", "seed"});
    r.get("duration", c.excitation.duration);
    r.get("dt", c.excitation.dt);
    r.get("start_x", c.excitation.start_x);
    r.get("attitude_amplitude", c.excitation.attitude_amplitude);
    r.get("seed", c.excitation.seed);
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void save_config(const ScenarioConfig& config, const std::filesystem::path& path) {
  write_text(path, config_to_json(config));
}

}  // namespace pvvs
