#pragma once

// JSON plant, controller and report files.
//
// Numbers are written in their shortest round-trip decimal form, so a value
// read back is bit-identical to the one written. Non-finite values (gamma of
// an infeasible probe, the H-infinity norm of an unstable loop) are written
// as null and read back as +inf.

#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmi/analysis.hpp"
#include "dmi/synth/multiobjective.hpp"

namespace dmi::io {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void bad(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double read_number(const json& j, const std::string& what) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) bad(what + " is not a number");
  return j.get<double>();
}

inline const json& field(const json& j, const std::string& key) {
  if (!j.is_object()) bad("expected an object holding '" + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) bad("missing field '" + key + "'");
  return *it;
}

inline double read_double(const json& j, const std::string& key) { return read_number(field(j, key), key); }

inline std::string read_string(const json& j, const std::string& key) {
  const json& v = field(j, key);
  if (!v.is_string()) bad("'" + key + "' is not a string");
  return v.get<std::string>();
}

inline bool read_bool(const json& j, const std::string& key) {
  const json& v = field(j, key);
  if (!v.is_boolean()) bad("'" + key + "' is not a boolean");
  return v.get<bool>();
}

inline int read_int(const json& j, const std::string& key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) bad("'" + key + "' is not an integer");
  return v.get<int>();
}

}  // namespace detail

/// Row-major nested arrays. A matrix with no rows is written as [].
inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(detail::number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Reads nested arrays; `cols_if_empty` gives the width of [].
inline Mat matrix_from_json(const json& j, const std::string& what, Index cols_if_empty = 0) {
  if (!j.is_array()) detail::bad(what + " is not an array of rows");
  if (j.empty()) return Mat::Zero(0, cols_if_empty);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Mat m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& row = j[i];
    if (!row.is_array()) detail::bad(what + " is not an array of rows");
    if (row.size() != cols) detail::bad(what + " has rows of unequal length");
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = detail::read_number(row[c], what);
      m(static_cast<Index>(i), static_cast<Index>(c)) = v;
    }
  }
  return m;
}

// ---- plant ----------------------------------------------------------------

inline json to_json(const Plant& p) {
  json j;
  j["name"] = p.name;
  j["A"] = to_json(p.A);
  j["B1"] = to_json(p.B1);
  j["B2"] = to_json(p.B2);
  j["C1"] = to_json(p.C1);
  j["D11"] = to_json(p.D11);
  j["D12"] = to_json(p.D12);
  if (p.has_measurement()) {
    j["C2"] = to_json(p.C2);
    j["D21"] = to_json(p.D21);
  }
  j["w_max"] = p.w_max;
  j["u_lim"] = p.u_lim;
  return j;
}

inline Plant plant_from_json(const json& j) {
  Plant p;
  p.name = j.contains("name") ? detail::read_string(j, "name") : std::string("plant");
  p.A = matrix_from_json(detail::field(j, "A"), "A");
  const Index n = p.A.rows();
  p.B1 = matrix_from_json(detail::field(j, "B1"), "B1");
  p.B2 = matrix_from_json(detail::field(j, "B2"), "B2");
  p.C1 = matrix_from_json(detail::field(j, "C1"), "C1", n);
  p.D11 = matrix_from_json(detail::field(j, "D11"), "D11", p.B1.cols());
  p.D12 = matrix_from_json(detail::field(j, "D12"), "D12", p.B2.cols());
  const bool has_c2 = j.contains("C2") && !j["C2"].is_null();
  const bool has_d21 = j.contains("D21") && !j["D21"].is_null();
  if (has_c2 != has_d21) detail::bad("C2 and D21 must be given together");
  if (has_c2) {
    p.C2 = matrix_from_json(j["C2"], "C2", n);
    p.D21 = matrix_from_json(j["D21"], "D21", p.B1.cols());
  } else {
    p.C2 = Mat::Zero(0, n);
    p.D21 = Mat::Zero(0, p.B1.cols());
  }
  p.w_max = detail::read_double(j, "w_max");
  p.u_lim = detail::read_double(j, "u_lim");
  try {
    p.validate();
  } catch (const Error& e) {
    detail::bad(std::string("invalid plant: ") + e.what());
  }
  return p;
}

// ---- controller -----------------------------------------------------------

inline json to_json(const Controller& c) {
  json j;
  if (const auto* k = std::get_if<StaticGain>(&c)) {
    j["K"] = to_json(k->K);
  } else {
    const auto& d = std::get<Dynamic>(c);
    j["Ac"] = to_json(d.Ac);
    j["Bc"] = to_json(d.Bc);
    j["Cc"] = to_json(d.Cc);
  }
  return j;
}

/// Accepts {"K": ...}, {"Ac","Bc","Cc"}, or any object with a "controller"
/// member (a synthesis report).
inline Controller controller_from_json(const json& j) {
  if (!j.is_object()) detail::bad("controller is not an object");
  if (j.contains("controller") && j["controller"].is_object()) return controller_from_json(j["controller"]);
  if (j.contains("K")) return StaticGain{matrix_from_json(j["K"], "K")};
  if (j.contains("Ac") && j.contains("Bc") && j.contains("Cc")) {
    return Dynamic{matrix_from_json(j["Ac"], "Ac"), matrix_from_json(j["Bc"], "Bc"), matrix_from_json(j["Cc"], "Cc")};
  }
  detail::bad("controller needs K or Ac, Bc, Cc");
}

// ---- certificates ---------------------------------------------------------

inline json to_json(const synth::Certificate& cert) {
  json j;
  std::visit(
      [&](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, synth::SfConventionalCert>) {
          j["type"] = "sf_conventional";
          j["Q"] = to_json(c.Q);
          j["Y"] = to_json(c.Y);
        } else if constexpr (std::is_same_v<C, synth::SfDilatedCert>) {
          j["type"] = "sf_dilated";
          j["X1"] = to_json(c.X1);
          j["X2"] = to_json(c.X2);
          j["G"] = to_json(c.G);
          j["Y"] = to_json(c.Y);
          j["epsilons"] = {c.eps.e1, c.eps.e2, c.eps.e3};
        } else if constexpr (std::is_same_v<C, synth::OfConventionalCert>) {
          j["type"] = "of_conventional";
          j["X"] = to_json(c.X);
          j["Y"] = to_json(c.Y);
          j["L"] = to_json(c.L);
          j["F"] = to_json(c.F);
          j["E"] = to_json(c.E);
          j["S"] = to_json(c.S);
          j["perturbed"] = c.perturbed;
        } else {
          j["type"] = "of_dilated";
          for (const auto& [k, m] : {std::pair<const char*, const Mat*>{"R", &c.R}, {"Y", &c.Y}, {"V", &c.V},
                                     {"M1", &c.M1}, {"M2", &c.M2}, {"L", &c.L}, {"E", &c.E}, {"F", &c.F},
                                     {"H21", &c.H21}, {"G21", &c.G21}, {"X1", &c.X1}, {"X2", &c.X2}, {"G", &c.G}}) {
            j[k] = to_json(*m);
          }
          j["epsilons"] = {c.eps.e1, c.eps.e2, c.eps.e3};
        }
        j["gamma"] = detail::number(c.gamma);
        j["alpha"] = c.alpha;
      },
      cert);
  return j;
}

inline synth::Epsilons epsilons_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) detail::bad("epsilons must be [e1, e2, e3]");
  return {detail::read_number(j[0], "e1"), detail::read_number(j[1], "e2"), detail::read_number(j[2], "e3")};
}

inline synth::Certificate certificate_from_json(const json& j) {
  const std::string type = detail::read_string(j, "type");
  auto m = [&](const char* k) { return matrix_from_json(detail::field(j, k), k); };
  const double gamma = detail::read_double(j, "gamma");
  const double alpha = detail::read_double(j, "alpha");
  if (type == "sf_conventional") {
    synth::SfConventionalCert c;
    c.Q = m("Q");
    c.Y = m("Y");
    c.gamma = gamma;
    c.alpha = alpha;
    return c;
  }
  if (type == "sf_dilated") {
    synth::SfDilatedCert c;
    c.X1 = m("X1");
    c.X2 = m("X2");
    c.G = m("G");
    c.Y = m("Y");
    c.eps = epsilons_from_json(detail::field(j, "epsilons"));
    c.gamma = gamma;
    c.alpha = alpha;
    return c;
  }
  if (type == "of_conventional") {
    synth::OfConventionalCert c;
    c.X = m("X");
    c.Y = m("Y");
    c.L = m("L");
    c.F = m("F");
    c.E = m("E");
    c.S = m("S");
    c.perturbed = detail::read_bool(j, "perturbed");
    c.gamma = gamma;
    c.alpha = alpha;
    return c;
  }
  if (type == "of_dilated") {
    synth::OfDilatedCert c;
    c.R = m("R");
    c.Y = m("Y");
    c.V = m("V");
    c.M1 = m("M1");
    c.M2 = m("M2");
    c.L = m("L");
    c.E = m("E");
    c.F = m("F");
    c.H21 = m("H21");
    c.G21 = m("G21");
    c.X1 = m("X1");
    c.X2 = m("X2");
    c.G = m("G");
    c.eps = epsilons_from_json(detail::field(j, "epsilons"));
    c.gamma = gamma;
    c.alpha = alpha;
    return c;
  }
  detail::bad("unknown certificate type '" + type + "'");
}

// ---- verification ---------------------------------------------------------

inline json to_json(const analysis::VerificationReport& r) {
  json j;
  j["stable"] = r.stable;
  j["hinf"] = detail::number(r.hinf);
  j["gamma_claimed"] = detail::number(r.gamma_claimed);
  j["invariant_ok"] = r.invariant_ok;
  j["alpha"] = r.alpha;
  j["certified"] = r.certified;
  j["peak_control"] = detail::number(r.peak_control);
  j["u_lim"] = r.u_lim;
  j["sim_max_u"] = detail::number(r.sim_max_u);
  j["sim_l2_ratio"] = detail::number(r.sim_l2_ratio);
  j["simulations"] = r.simulations;
  return j;
}

inline analysis::VerificationReport verification_from_json(const json& j) {
  analysis::VerificationReport r;
  r.stable = detail::read_bool(j, "stable");
  r.hinf = detail::read_double(j, "hinf");
  r.gamma_claimed = detail::read_double(j, "gamma_claimed");
  r.invariant_ok = detail::read_bool(j, "invariant_ok");
  r.alpha = detail::read_double(j, "alpha");
  r.certified = detail::read_bool(j, "certified");
  r.peak_control = detail::read_double(j, "peak_control");
  r.u_lim = detail::read_double(j, "u_lim");
  r.sim_max_u = detail::read_double(j, "sim_max_u");
  r.sim_l2_ratio = detail::read_double(j, "sim_l2_ratio");
  r.simulations = detail::read_int(j, "simulations");
  return r;
}

// ---- report ---------------------------------------------------------------

struct ReportFile {
  std::string command;    // "synth" or "analyze"
  std::string status = "ok";  // "ok" or the error class
  std::string reason;
  std::string plant;
  std::string method;     // empty for analyze
  std::string feedback;
  std::string eps_mode;
  double gamma = std::numeric_limits<double>::infinity();
  double alpha = 0.0;
  std::optional<synth::Epsilons> epsilons;
  std::optional<Controller> controller;
  std::optional<synth::Certificate> certificate;
  std::optional<analysis::VerificationReport> verification;
  int solves = 0;
  int iterations = 0;
  int eps_evaluations = 0;
  std::vector<synth::TraceEntry> trace;
};

inline ReportFile report_from_synthesis(const synth::SynthesisReport& r, const std::string& plant) {
  ReportFile f;
  f.command = "synth";
  f.plant = plant;
  f.method = synth::to_string(r.method);
  f.feedback = synth::to_string(r.feedback);
  f.eps_mode = synth::to_string(r.eps_mode);
  f.gamma = r.gamma;
  f.alpha = r.alpha;
  f.epsilons = r.eps;
  f.controller = r.controller;
  f.certificate = r.certificate;
  f.verification = r.verification;
  f.solves = r.stats.solves;
  f.iterations = r.stats.iterations;
  f.eps_evaluations = r.eps_evaluations;
  f.trace = r.trace;
  return f;
}

inline json to_json(const ReportFile& r) {
  json j;
  j["command"] = r.command;
  j["status"] = r.status;
  j["reason"] = r.reason;
  j["plant"] = r.plant;
  j["method"] = r.method;
  j["feedback"] = r.feedback;
  j["eps_mode"] = r.eps_mode;
  j["gamma"] = detail::number(r.gamma);
  j["alpha"] = r.alpha;
  j["epsilons"] = r.epsilons ? json{r.epsilons->e1, r.epsilons->e2, r.epsilons->e3} : json(nullptr);
  j["controller"] = r.controller ? to_json(*r.controller) : json(nullptr);
  j["certificates"] = r.certificate ? to_json(*r.certificate) : json(nullptr);
  j["verification"] = r.verification ? to_json(*r.verification) : json(nullptr);
  j["solver_stats"] = {{"solves", r.solves}, {"iterations", r.iterations}, {"eps_evaluations", r.eps_evaluations}};
  json t = json::array();
  for (const synth::TraceEntry& e : r.trace) {
    t.push_back({{"epsilons", {e.eps.e1, e.eps.e2, e.eps.e3}}, {"alpha", e.alpha}, {"gamma", detail::number(e.gamma)}});
  }
  j["trace"] = std::move(t);
  return j;
}

inline ReportFile report_from_json(const json& j) {
  ReportFile r;
  r.command = detail::read_string(j, "command");
  r.status = detail::read_string(j, "status");
  r.reason = detail::read_string(j, "reason");
  r.plant = detail::read_string(j, "plant");
  r.method = detail::read_string(j, "method");
  r.feedback = detail::read_string(j, "feedback");
  r.eps_mode = detail::read_string(j, "eps_mode");
  r.gamma = detail::read_double(j, "gamma");
  r.alpha = detail::read_double(j, "alpha");
  if (!detail::field(j, "epsilons").is_null()) r.epsilons = epsilons_from_json(j["epsilons"]);
  if (!detail::field(j, "controller").is_null()) r.controller = controller_from_json(j["controller"]);
  if (!detail::field(j, "certificates").is_null()) r.certificate = certificate_from_json(j["certificates"]);
  if (!detail::field(j, "verification").is_null()) r.verification = verification_from_json(j["verification"]);
  const json& s = detail::field(j, "solver_stats");
  r.solves = detail::read_int(s, "solves");
  r.iterations = detail::read_int(s, "iterations");
  r.eps_evaluations = detail::read_int(s, "eps_evaluations");
  const json& t = detail::field(j, "trace");
  if (!t.is_array()) detail::bad("trace is not an array");
  for (const json& e : t) {
    r.trace.push_back({epsilons_from_json(detail::field(e, "epsilons")), detail::read_double(e, "alpha"),
                       detail::read_double(e, "gamma")});
  }
  return r;
}

// ---- files ----------------------------------------------------------------

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Callers check existence first; anything unreadable past that point is a
/// ParseError.
inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::bad("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    detail::bad(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::InvalidArgument, "write to '" + path + "' failed");
}

inline Plant read_plant(const std::string& path) { return plant_from_json(read_json_file(path)); }
inline Controller read_controller(const std::string& path) { return controller_from_json(read_json_file(path)); }
inline ReportFile read_report(const std::string& path) { return report_from_json(read_json_file(path)); }
inline void write_report(const std::string& path, const ReportFile& r) { write_text_file(path, dump(to_json(r))); }

}  // namespace dmi::io
