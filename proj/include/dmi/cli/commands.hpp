#pragma once

// synth / analyze / reproduce subcommands. Each takes its arguments (without
// the program and subcommand names) and returns the process exit code.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dmi/cli/io.hpp"
#include "dmi/plants.hpp"

namespace dmi::cli {

enum Exit : int {
  kOk = 0,
  kFailed = 1,
  kAllInfeasible = 2,
  kVerificationFailed = 3,
  kBadFlags = 64,
  kParseError = 65,
  kFileNotFound = 66,
};

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::AllInfeasible:
    case ErrorCode::Infeasible:
    case ErrorCode::InfeasibleAtEpsilon: return kAllInfeasible;
    case ErrorCode::VerificationFailed: return kVerificationFailed;
    case ErrorCode::ParseError: return kParseError;
    default: return kFailed;
  }
}

namespace detail {

inline int default_jobs() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

/// CLI11 wants the arguments reversed.
inline int parse(CLI::App& app, std::vector<std::string> args, std::ostream& out, std::ostream& err, bool& done) {
  std::reverse(args.begin(), args.end());
  done = false;
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    done = true;
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << app.get_name() << ": " << e.what() << "\n";
    done = true;
    return kBadFlags;
  }
  return kOk;
}

inline bool exists(const std::string& path, std::ostream& err) {
  if (std::filesystem::is_regular_file(path)) return true;
  err << "no such file: " << path << "\n";
  return false;
}

/// "LO:HI:N"
inline synth::Grid parse_grid(const std::string& s) {
  synth::Grid g;
  const auto a = s.find(':'), b = s.rfind(':');
  if (a == std::string::npos || a == b) throw CLI::ValidationError("--alpha-grid", "expected LO:HI:N");
  try {
    g.lo = std::stod(s.substr(0, a));
    g.hi = std::stod(s.substr(a + 1, b - a - 1));
    g.n = std::stoi(s.substr(b + 1));
  } catch (const std::exception&) {
    throw CLI::ValidationError("--alpha-grid", "expected LO:HI:N");
  }
  if (!(g.lo > 0.0) || !(g.hi >= g.lo) || g.n < 1) throw CLI::ValidationError("--alpha-grid", "need 0 < LO <= HI, N >= 1");
  return g;
}

inline void print_verification(std::ostream& out, const analysis::VerificationReport& v) {
  out << "  stable " << (v.stable ? "yes" : "no") << ", hinf " << v.hinf << ", certified "
      << (v.certified ? "yes" : "no") << ", peak |u| bound " << v.peak_control << " (limit " << v.u_lim
      << "), simulated max |u| " << v.sim_max_u << " over " << v.simulations << " runs\n";
}

}  // namespace detail

inline int cmd_synth(const std::vector<std::string>& args, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  CLI::App app{"Multi-objective synthesis", "synth"};
  std::string plant_path, out_path, feedback = "state", method = "conventional", eps_mode = "common";
  std::string grid = "0.01:100:13";
  std::optional<double> eps;
  std::uint64_t seed = 1;
  int jobs = detail::default_jobs();
  int simulations = 50;
  app.add_option("--plant", plant_path, "plant JSON file")->required();
  app.add_option("--feedback", feedback)->check(CLI::IsMember({"state", "output"}));
  app.add_option("--method", method)->check(CLI::IsMember({"conventional", "dilated"}));
  app.add_option("--eps-mode", eps_mode)->check(CLI::IsMember({"common", "split"}));
  app.add_option("--alpha-grid", grid, "LO:HI:N, log-spaced");
  app.add_option("--out", out_path, "report JSON file")->required();
  app.add_option("--eps", eps, "common: fixed eps; split: fixed eps2");
  app.add_option("--seed", seed, "seed of the simulation disturbances");
  app.add_option("--jobs", jobs)->check(CLI::PositiveNumber);
  app.add_option("--simulations", simulations)->check(CLI::NonNegativeNumber);
  bool done = false;
  const int rc = detail::parse(app, args, out, err, done);
  if (done) return rc;

  synth::MultiOptions o;
  try {
    o.alpha.grid = detail::parse_grid(grid);
  } catch (const CLI::ValidationError& e) {
    err << "synth: " << e.what() << "\n";
    return kBadFlags;
  }
  o.alpha.jobs = jobs;
  o.eps = eps;
  o.verify_opts.seed = seed;
  o.verify_opts.simulations = simulations;
  if (!detail::exists(plant_path, err)) return kFileNotFound;

  Plant plant;
  try {
    plant = io::read_plant(plant_path);
  } catch (const Error& e) {
    err << "synth: " << e.what() << "\n";
    return kParseError;
  }
  const auto fb = feedback == "state" ? synth::Feedback::State : synth::Feedback::Output;
  if (fb == synth::Feedback::Output && !plant.has_measurement()) {
    err << "synth: output feedback needs C2 and D21 in " << plant_path << "\n";
    return kParseError;
  }
  const auto m = method == "conventional" ? synth::Method::Conventional : synth::Method::Dilated;
  const auto mode = eps_mode == "common" ? synth::EpsMode::Common : synth::EpsMode::Split;

  io::ReportFile rep;
  int code = kOk;
  try {
    const synth::SynthesisReport r = synth::multiobjective(plant, fb, m, mode, o);
    rep = io::report_from_synthesis(r, plant.name);
    if (r.verification && !analysis::passed(*r.verification)) {
      rep.status = std::string(to_string(ErrorCode::VerificationFailed));
      rep.reason = "a-posteriori verification rejected the controller";
      code = kVerificationFailed;
    }
  } catch (const Error& e) {
    rep.command = "synth";
    rep.plant = plant.name;
    rep.method = method;
    rep.feedback = feedback;
    rep.eps_mode = eps_mode;
    rep.status = std::string(to_string(e.code()));
    rep.reason = e.what();
    code = exit_code(e.code());
  }
  try {
    io::write_report(out_path, rep);
  } catch (const Error& e) {
    err << "synth: " << e.what() << "\n";
    return kFailed;
  }

  out << std::setprecision(6);
  out << plant.name << ": " << feedback << " feedback, " << method;
  if (m == synth::Method::Dilated) out << " (" << eps_mode << " eps)";
  out << "\n";
  if (code == kOk || code == kVerificationFailed) {
    out << "  gamma " << rep.gamma << " at alpha " << rep.alpha;
    if (rep.epsilons) out << ", eps (" << rep.epsilons->e1 << ", " << rep.epsilons->e2 << ", " << rep.epsilons->e3 << ")";
    out << "\n  " << rep.solves << " SDP solves, " << rep.eps_evaluations << " eps evaluations\n";
    if (rep.verification) detail::print_verification(out, *rep.verification);
  }
  if (code != kOk) err << "synth: " << rep.reason << "\n";
  return code;
}

inline int cmd_analyze(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Closed-loop verification", "analyze"};
  std::string plant_path, controller_path, out_path;
  std::uint64_t seed = 1;
  int simulations = 50;
  app.add_option("--plant", plant_path)->required();
  app.add_option("--controller", controller_path, "controller JSON (K or Ac/Bc/Cc) or a synthesis report")
      ->required();
  app.add_option("--out", out_path)->required();
  app.add_option("--seed", seed);
  app.add_option("--simulations", simulations)->check(CLI::NonNegativeNumber);
  bool done = false;
  const int rc = detail::parse(app, args, out, err, done);
  if (done) return rc;
  if (!detail::exists(plant_path, err) || !detail::exists(controller_path, err)) return kFileNotFound;

  Plant plant;
  Controller c;
  ClosedLoop cl;
  Mat gain;
  try {
    plant = io::read_plant(plant_path);
    c = io::read_controller(controller_path);
    cl = close_loop(plant, c);
    gain = control_gain(plant, c);
  } catch (const Error& e) {
    err << "analyze: " << e.what() << "\n";
    return kParseError;
  }

  io::ReportFile rep;
  rep.command = "analyze";
  rep.plant = plant.name;
  rep.feedback = std::holds_alternative<StaticGain>(c) ? "state" : "output";
  rep.controller = c;
  int code = kOk;
  try {
    analysis::VerifyOptions vo;
    vo.seed = seed;
    vo.simulations = simulations;
    const double hinf = analysis::is_stable(cl) ? analysis::hinf_norm(cl) : std::numeric_limits<double>::infinity();
    const analysis::VerificationReport v = analysis::verify(cl, gain, plant.w_max, plant.u_lim, hinf, std::nullopt, 0.0, vo);
    rep.gamma = v.hinf;
    rep.alpha = v.alpha;
    rep.verification = v;
    if (!(v.stable && v.certified && std::isfinite(v.hinf))) {
      rep.status = v.stable ? std::string(to_string(ErrorCode::NoCertificate)) : std::string(to_string(ErrorCode::Unstable));
      rep.reason = v.stable ? "no saturation certificate" : "closed loop is not Hurwitz";
      code = kFailed;
    }
  } catch (const Error& e) {
    rep.status = std::string(to_string(e.code()));
    rep.reason = e.what();
    code = kFailed;
  }
  try {
    io::write_report(out_path, rep);
  } catch (const Error& e) {
    err << "analyze: " << e.what() << "\n";
    return kFailed;
  }
  out << std::setprecision(6) << plant.name << ": " << rep.feedback << " feedback controller\n";
  if (rep.verification) detail::print_verification(out, *rep.verification);
  if (code != kOk) err << "analyze: " << rep.status << ": " << rep.reason << "\n";
  return code;
}

/// One row of the reproduction table.
struct ReproRow {
  std::string what;
  double published = 0.0;
  double computed = 0.0;
  double tol = 0.0;  // relative; 0 = informational
  [[nodiscard]] double rel_err() const { return std::abs(computed - published) / std::abs(published); }
  [[nodiscard]] bool ok() const { return tol == 0.0 || rel_err() <= tol; }
};

struct ReproCase {
  Plant plant;
  synth::Feedback feedback;
  double conventional, dilated, split, eps2;  // published values
  double tol;
};

inline ReproCase repro_case(const std::string& name) {
  if (name == "sf") return {plants::state_feedback_example(), synth::Feedback::State, 1.3038, 0.8345, 0.8104, 0.0802, 0.02};
  return {plants::output_feedback_example(), synth::Feedback::Output, 1.7636, 1.5029, 1.2746, 0.0181, 0.05};
}

inline int cmd_reproduce(const std::vector<std::string>& args, std::ostream& out = std::cout,
                         std::ostream& err = std::cerr) {
  CLI::App app{"Reproduce the two-mass examples", "reproduce"};
  std::string which;
  bool split = false;
  std::uint64_t seed = 1;
  int jobs = detail::default_jobs();
  app.add_option("--case", which)->required()->check(CLI::IsMember({"sf", "of"}));
  app.add_flag("--split-eps", split, "also run the split-eps search");
  app.add_option("--seed", seed);
  app.add_option("--jobs", jobs)->check(CLI::PositiveNumber);
  bool done = false;
  const int rc = detail::parse(app, args, out, err, done);
  if (done) return rc;

  const ReproCase rc_ = repro_case(which);
  synth::MultiOptions o;
  o.alpha.jobs = jobs;
  o.verify_opts.seed = seed;

  std::vector<ReproRow> rows;
  bool verified = true;
  auto run = [&](synth::Method m, synth::EpsMode mode, std::optional<double> eps) -> std::optional<synth::SynthesisReport> {
    synth::MultiOptions oo = o;
    oo.eps = eps;
    try {
      synth::SynthesisReport r = synth::multiobjective(rc_.plant, rc_.feedback, m, mode, oo);
      if (!r.verification || !analysis::passed(*r.verification)) {
        verified = false;
        err << "reproduce: " << synth::to_string(m) << " controller failed verification\n";
      }
      return r;
    } catch (const Error& e) {
      err << "reproduce: " << synth::to_string(m) << ": " << e.what() << "\n";
      return std::nullopt;
    }
  };
  const auto inf = std::numeric_limits<double>::infinity();
  const auto con = run(synth::Method::Conventional, synth::EpsMode::Common, std::nullopt);
  const auto dil = run(synth::Method::Dilated, synth::EpsMode::Common, std::nullopt);
  const double gc = con ? con->gamma : inf, gd = dil ? dil->gamma : inf;
  rows.push_back({"gamma conventional", rc_.conventional, gc, rc_.tol});
  rows.push_back({"gamma dilated, common eps", rc_.dilated, gd, which == "sf" ? 0.03 : 0.05});
  rows.push_back({"improvement, common eps (%)", 100.0 * (1.0 - rc_.dilated / rc_.conventional),
                  100.0 * (1.0 - gd / gc), 0.0});
  if (split) {
    const auto sp = run(synth::Method::Dilated, synth::EpsMode::Split, rc_.eps2);
    const double gs = sp ? sp->gamma : inf;
    rows.push_back({"gamma dilated, split eps", rc_.split, gs, which == "sf" ? 0.03 : 0.05});
    rows.push_back({"improvement, split eps (%)", 100.0 * (1.0 - rc_.split / rc_.conventional),
                    100.0 * (1.0 - gs / gc), 0.0});
  }

  bool all = verified;
  out << std::left << std::setw(30) << "quantity" << std::right << std::setw(12) << "published" << std::setw(12)
      << "computed" << std::setw(10) << "rel.err" << std::setw(8) << "tol" << "  result\n";
  out << std::fixed;
  for (const ReproRow& r : rows) {
    out << std::left << std::setw(30) << r.what << std::right << std::setprecision(4) << std::setw(12) << r.published
        << std::setw(12) << r.computed << std::setw(10) << std::setprecision(4) << r.rel_err() << std::setw(8);
    if (r.tol > 0.0) out << r.tol << "  " << (r.ok() ? "ok" : "MISMATCH") << "\n";
    else out << "-" << "  info\n";
    all = all && r.ok();
  }
  out.unsetf(std::ios::fixed);
  if (dil && dil->eps) out << "dilated common eps " << dil->eps->e1 << " (" << dil->eps_evaluations << " evaluations)\n";
  out << "controllers verified: " << (verified ? "yes" : "no") << "\n";
  return all ? kOk : kFailed;
}

/// Dispatches `dmi <subcommand> ...`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const std::string usage =
      "usage: dmi {synth|analyze|reproduce} [options]\n"
      "       dmi <subcommand> --help\n";
  if (argc < 2) {
    err << usage;
    return kBadFlags;
  }
  const std::string sub = argv[1];
  const std::vector<std::string> rest(argv + 2, argv + argc);
  if (sub == "synth") return cmd_synth(rest, out, err);
  if (sub == "analyze") return cmd_analyze(rest, out, err);
  if (sub == "reproduce") return cmd_reproduce(rest, out, err);
  if (sub == "--help" || sub == "-h") {
    out << usage;
    return kOk;
  }
  err << "unknown subcommand '" << sub << "'\n" << usage;
  return kBadFlags;
}

}  // namespace dmi::cli
