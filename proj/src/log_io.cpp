#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pvvs/harness.hpp"

namespace pvvs {

namespace {

constexpr const char* kColumns[] = {
    "t",         "x",           "y",           "z",           "psi",        "vx",
    "vy",        "vz",          "wz",          "meas_x",      "meas_y",     "meas_z",
    "meas_psi",  "meas_vx",     "meas_vy",     "meas_vz",     "meas_wz",    "r",
    "theta",     "err_r",       "err_theta",   "v_xd",        "nuc_vx",     "nuc_vy",
    "nuc_vz",    "nuc_wx",      "nuc_wy",      "nuc_wz",      "ref_vx",     "ref_vy",
    "ref_vz",    "ref_wz",      "feature_valid", "left_valid", "right_valid", "missed_frames",
    "d_l1l2",    "nmpc_status", "nmpc_kkt",    "nmpc_iterations", "qp_iterations"};
constexpr std::size_t kColumnCount = std::size(kColumns);

void put(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void put(std::string& out, long long v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw Error("parse", "bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<double> record_values(const RunRecord& r) {
  std::vector<double> v;
  v.reserve(kColumnCount);
  v.push_back(r.t);
  for (double x : r.truth.vec()) v.push_back(x);
  for (double x : r.measured.vec()) v.push_back(x);
  v.push_back(r.xi.r);
  v.push_back(r.xi.theta);
  v.push_back(r.xi_err(0));
  v.push_back(r.xi_err(1));
  v.push_back(r.v_xd);
  for (double x : r.nu_c) v.push_back(x);
  for (double x : r.nu_ref.vec()) v.push_back(x);
  return v;
}

}  // namespace

std::string log_csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kColumnCount; ++i) {
    if (i) h += ',';
    h += kColumns[i];
  }
  return h + "\n";
}

std::string log_to_csv(const RunLog& log) {
  std::string out = "# pvvs run log name=" + log.name + " mode=" + std::string(to_string(log.mode)) +
                    " seed=" + std::to_string(log.seed) +
                    " dropout_events=" + std::to_string(log.dropout_events) +
                    " feature_loss_events=" + std::to_string(log.feature_loss_events) +
                    " qp_failures=" + std::to_string(log.qp_failures) +
                    " failed=" + (log.failed ? "1" : "0") + "\n";
  out += log_csv_header();
  for (const RunRecord& r : log.records) {
    const std::vector<double> v = record_values(r);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      put(out, v[i]);
    }
    for (long long x : {static_cast<long long>(r.feature_valid), static_cast<long long>(r.left_valid),
                        static_cast<long long>(r.right_valid), static_cast<long long>(r.missed_frames)}) {
      out += ',';
      put(out, x);
    }
    out += ',';
    put(out, r.d_l1l2);
    out += ',';
    put(out, static_cast<long long>(r.nmpc_status));
    out += ',';
    put(out, r.nmpc_kkt);
    out += ',';
    put(out, static_cast<long long>(r.nmpc_iterations));
    out += ',';
    put(out, static_cast<long long>(r.qp_iterations));
    out += '\n';
  }
  return out;
}

RunLog log_from_csv(const std::string& text) {
  RunLog log;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "name") log.name = v;
        else if (k == "mode") log.mode = parse_mode(v);
        else if (k == "seed") log.seed = std::stoull(v);
        else if (k == "dropout_events") log.dropout_events = std::stoi(v);
        else if (k == "feature_loss_events") log.feature_loss_events = std::stoi(v);
        else if (k == "qp_failures") log.qp_failures = std::stoi(v);
        else if (k == "failed") log.failed = v == "1";
      }
      continue;
    }
    if (!header_seen) {
      if (line + "\n" != log_csv_header()) throw Error("parse", "unexpected CSV header");
      header_seen = true;
      continue;
    }
    std::vector<double> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      f.push_back(parse_double(std::string_view(line).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != kColumnCount) throw Error("parse", "row has " + std::to_string(f.size()) + " fields");
    RunRecord r;
    std::size_t i = 0;
    r.t = f[i++];
    Vec8 x, m;
    for (int k = 0; k < 8; ++k) x(k) = f[i++];
    for (int k = 0; k < 8; ++k) m(k) = f[i++];
    r.truth = State8::from(x);
    r.measured = State8::from(m);
    r.xi.r = f[i++];
    r.xi.theta = f[i++];
    r.xi_err(0) = f[i++];
    r.xi_err(1) = f[i++];
    r.v_xd = f[i++];
    for (int k = 0; k < 6; ++k) r.nu_c(k) = f[i++];
    Vec4 ref;
    for (int k = 0; k < 4; ++k) ref(k) = f[i++];
    r.nu_ref = BodyVel4::from(ref);
    r.feature_valid = f[i++] != 0.0;
    r.left_valid = f[i++] != 0.0;
    r.right_valid = f[i++] != 0.0;
    r.missed_frames = static_cast<int>(f[i++]);
    r.d_l1l2 = f[i++];
    r.nmpc_status = static_cast<int>(f[i++]);
    r.nmpc_kkt = f[i++];
    r.nmpc_iterations = static_cast<int>(f[i++]);
    r.qp_iterations = static_cast<int>(f[i++]);
    log.records.push_back(r);
  }
  if (!header_seen) throw Error("parse", "missing CSV header");
  return log;
}

std::string timing_to_csv(const RunLog& log) {
  std::string out = "t,perception_ms,vs_ms,nmpc_ms,cycle_ms\n";
  for (const RunRecord& r : log.records) {
    for (double v : {r.t, r.timing.perception_ms, r.timing.vs_ms, r.timing.nmpc_ms}) {
      put(out, v);
      out += ',';
    }
    put(out, r.timing.cycle_ms);
    out += '\n';
  }
  return out;
}

std::string summary_to_json(const RunLog& log, const RunSummary& s) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["name"] = log.name;
  j["mode"] = std::string(to_string(log.mode));
  j["seed"] = log.seed;
  j["cycles"] = log.records.size();
  j["failed"] = log.failed;
  j["dropout_events"] = log.dropout_events;
  j["feature_loss_events"] = log.feature_loss_events;
  j["qp_failures"] = log.qp_failures;
  j["final_abs_err_r"] = num(s.final_abs_r);
  j["final_abs_err_theta"] = num(s.final_abs_theta);
  j["max_abs_err_r_steady"] = num(s.max_abs_r_steady);
  j["max_abs_err_theta_steady"] = num(s.max_abs_theta_steady);
  j["mean_vx_steady"] = num(s.mean_vx_steady);
  j["mean_vxd_steady"] = num(s.mean_vxd_steady);
  j["max_z"] = num(s.max_z);
  j["mean_residual_wxy"] = num(s.mean_residual_wxy);
  j["convergence_time"] = num(s.convergence_time);
  j["max_u_violation"] = num(s.max_u_violation);
  j["timing_ms"] = {{"perception", s.mean_perception_ms},
                    {"vs", s.mean_vs_ms},
                    {"nmpc", s.mean_nmpc_ms},
                    {"cycle", s.mean_cycle_ms}};
  return j.dump(2) + "\n";
}

std::string batch_to_csv(const std::vector<WindowStats>& stats) {
  std::string out = "t_end,mean_abs_err_r,var_err_r,mean_abs_err_theta,var_err_theta\n";
  for (const WindowStats& w : stats) {
    for (double v : {w.t_end, w.mean_r, w.var_r, w.mean_theta}) {
      put(out, v);
      out += ',';
    }
    put(out, w.var_theta);
    out += '\n';
  }
  return out;
}

namespace {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> y;
};

std::string svg_chart(const std::string& title, const std::string& y_label,
                      const std::vector<double>& t, const std::vector<Series>& series) {
  constexpr double W = 800, H = 360, L = 70, R = 20, T = 40, B = 50;
  double t0 = t.empty() ? 0.0 : t.front(), t1 = t.empty() ? 1.0 : t.back();
  if (t1 <= t0) t1 = t0 + 1.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Series& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double tv) { return L + (tv - t0) / (t1 - t0) * (W - L - R); };
  auto py = [&](double v) { return T + (hi - v) / (hi - lo) * (H - T - B); };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0, tv = t0 + (t1 - t0) * i / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    o << "<text x=\"" << px(tv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << tv << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">time [s]</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  double legend_x = L + 10;
  for (const Series& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.3\" points=\"";
    for (std::size_t i = 0; i < s.y.size() && i < t.size(); ++i) {
      if (std::isfinite(s.y[i])) o << px(t[i]) << ',' << py(s.y[i]) << ' ';
    }
    o << "\"/>\n";
    o << "<text x=\"" << legend_x << "\" y=\"" << T + 14 << "\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
    legend_x += 12.0 + 7.0 * s.label.size();
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace

std::string plot_svg(const RunLog& log, const std::string& what) {
  std::vector<double> t;
  for (const RunRecord& r : log.records) t.push_back(r.t);
  auto channel = [&](auto f) {
    std::vector<double> y;
    for (const RunRecord& r : log.records) y.push_back(f(r));
    return y;
  };
  if (what == "errors") {
    return svg_chart(log.name + ": feature errors", "error", t,
                     {{"r err (normalized)", "#1f77b4", channel([](const RunRecord& r) { return r.xi_err(0); })},
                      {"theta err [rad]", "#d62728", channel([](const RunRecord& r) { return r.xi_err(1); })}});
  }
  if (what == "velocity") {
    return svg_chart(log.name + ": forward speed", "m/s", t,
                     {{"v_x", "#1f77b4", channel([](const RunRecord& r) { return r.truth.vel.vx; })},
                      {"v_xd", "#2ca02c", channel([](const RunRecord& r) { return r.v_xd; })},
                      {"v_x err", "#d62728", channel([](const RunRecord& r) { return r.v_xd - r.truth.vel.vx; })}});
  }
  if (what == "altitude") {
    return svg_chart(log.name + ": altitude", "m", t,
                     {{"z", "#1f77b4", channel([](const RunRecord& r) { return r.truth.pose.z; })},
                      {"feature valid", "#ff7f0e", channel([](const RunRecord& r) { return r.feature_valid ? 1.0 : 0.0; })}});
  }
  throw Error("config", "unknown plot '" + what + "'");
}

std::string batch_plot_svg(const std::vector<WindowStats>& stats) {
  std::vector<double> t;
  std::vector<double> mr, sr_hi, mt, st_hi;
  for (const WindowStats& w : stats) {
    t.push_back(w.t_end);
    mr.push_back(w.mean_r);
    sr_hi.push_back(w.mean_r + std::sqrt(w.var_r));
    mt.push_back(w.mean_theta);
    st_hi.push_back(w.mean_theta + std::sqrt(w.var_theta));
  }
  return svg_chart("batch: mean and mean + std of |error| per window", "|error|", t,
                   {{"mean |r err|", "#1f77b4", mr},
                    {"+std", "#aec7e8", sr_hi},
                    {"mean |theta err|", "#d62728", mt},
                    {"+std", "#ff9896", st_hi}});
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
  if (!out) throw Error("io", "write failed for " + path.string());
}

void export_log(const RunLog& log, const RunSummary& summary, const std::filesystem::path& dir,
                const std::string& stem, bool csv, bool plots) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create " + dir.string() + ": " + ec.message());
  if (csv) {
    write_text(dir / (stem + ".csv"), log_to_csv(log));
    write_text(dir / (stem + "_timing.csv"), timing_to_csv(log));
  }
  write_text(dir / (stem + "_summary.json"), summary_to_json(log, summary));
  if (plots) {
    for (const char* what : {"errors", "velocity", "altitude"}) {
      write_text(dir / (stem + "_" + what + ".svg"), plot_svg(log, what));
    }
  }
}

}  // namespace pvvs
