#include "hdgch/cli.hpp"

#include "hdgch/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#ifndef HDGCH_VERSION
#define HDGCH_VERSION "unknown"
#endif
#ifndef HDGCH_GIT_COMMIT
#define HDGCH_GIT_COMMIT "unknown"
#endif

namespace hdgch {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Subcommand s) {
  switch (s) {
    case Subcommand::convergence: return "convergence";
    case Subcommand::simulate: return "simulate";
    case Subcommand::project: return "project";
  }
  return "?";
}

std::vector<int> parse_levels(const std::string& s) {
  auto to_int = [&](const std::string& t) {
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != t.size()) throw ParameterError("bad level list '" + s + "'");
    if (v < 0 || v > 12) throw ParameterError("level " + t + " out of range [0, 12]");
    return v;
  };
  std::vector<int> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const int a = to_int(s.substr(0, dots)), b = to_int(s.substr(dots + 2));
    if (b < a) throw ParameterError("empty level range '" + s + "'");
    for (int l = a; l <= b; ++l) out.push_back(l);
  } else {
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_int(item));
  }
  if (out.empty()) throw ParameterError("bad level list '" + s + "'");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] <= out[i - 1]) throw ParameterError("levels must increase: '" + s + "'");
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_times(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw ParameterError("bad snapshot time '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// flag values as typed; resolved against per-subcommand defaults afterwards
struct Raw {
  int k = 0;
  std::string levels, scheme = "centered", case_name, dt_rule, preconditioner = "ichol", snapshots;
  double alpha = 10, tau_c = 10, pe = 0, eps = 0, dt = 0, T = 0, h = 0.02, time = 0.3, a = 200, b = 0.1;
  double newton_tol = 1e-11, minres_abs = 1e-14, minres_rel = 1e-12;
  int newton_max = 25, minres_max = 20000, threads = 1, resolution = 256;
  std::uint64_t seed = 0;
  std::string out = "out";
  bool check = false;
  std::string manifest;
};

using Options = std::map<std::string, CLI::Option*>;

Options add_common(CLI::App* sub, Raw& r) {
  Options o;
  o["k"] = sub->add_option("--k", r.k, "polynomial degree k (scalar space P^{k+1})")->check(CLI::Range(0, 6));
  o["scheme"] = sub->add_option("--scheme", r.scheme, "convection discretization")->check(CLI::IsMember({"centered", "upwind"}));
  o["alpha"] = sub->add_option("--alpha", r.alpha, "stabilization alpha (tau = alpha / h_E)");
  o["tau-c"] = sub->add_option("--tau-c", r.tau_c, "upwind penalty tau_c");
  o["pe"] = sub->add_option("--pe", r.pe, "Peclet number");
  o["threads"] = sub->add_option("--threads", r.threads, "worker threads for local assembly")->check(CLI::PositiveNumber);
  o["out"] = sub->add_option("--out", r.out, "output directory");
  o["check"] = sub->add_flag("--check", r.check, "compare against thresholds; exit 4 on failure");
  o["preconditioner"] = sub->add_option("--preconditioner", r.preconditioner, "MINRES preconditioner")
                            ->check(CLI::IsMember({"none", "jacobi", "ichol"}));
  o["minres-abs-tol"] = sub->add_option("--minres-abs-tol", r.minres_abs, "MINRES absolute tolerance");
  o["minres-rel-tol"] = sub->add_option("--minres-rel-tol", r.minres_rel, "MINRES relative tolerance");
  o["minres-max-iter"] = sub->add_option("--minres-max-iter", r.minres_max, "MINRES iteration limit");
  o["manifest"] = sub->add_option("--manifest", r.manifest, "rerun the configuration recorded in a manifest.json");
  return o;
}

void add_stepping(CLI::App* sub, Raw& r, Options& o) {
  o["eps"] = sub->add_option("--eps", r.eps, "interface width epsilon");
  o["dt"] = sub->add_option("--dt", r.dt, "time step");
  o["T"] = sub->add_option("--T", r.T, "final time");
  o["seed"] = sub->add_option("--seed", r.seed, "random seed");
  o["newton-tol"] = sub->add_option("--newton-tol", r.newton_tol, "Newton absolute residual tolerance");
  o["newton-max-iter"] = sub->add_option("--newton-max-iter", r.newton_max, "Newton iteration limit");
}

bool given(const Options& o, const std::string& name) {
  const auto it = o.find(name);
  return it != o.end() && it->second->count() > 0;
}

std::string usage_text(const CLI::App& app) {
  std::ostringstream os;
  os << app.help();
  return os.str();
}

// canonical args of the manifest, followed by everything but --manifest
std::vector<std::string> expand_manifest(const std::vector<std::string>& args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--manifest" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--manifest=", 0) == 0) {
      path = args[i].substr(11);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ParameterError("--manifest: cannot read " + path);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ParameterError("--manifest: " + path + " is not valid JSON (" + e.what() + ")");
  }
  if (!m.contains("canonical_args") || !m["canonical_args"].is_array())
    throw ParameterError("--manifest: " + path + " has no canonical_args");
  std::vector<std::string> out = m["canonical_args"].get<std::vector<std::string>>();
  if (out.empty() || rest.empty() || out[0] != rest[0])
    throw ParameterError("--manifest: " + path + " records a different subcommand");
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

}  // namespace

CliInvocation parse_config(const std::vector<std::string>& args_in) {
  CLI::App app{"HDG convex-splitting solver for the convective Cahn-Hilliard equation", "hdgch"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", HDGCH_VERSION);

  Raw r;
  CLI::App* conv = app.add_subcommand("convergence", "manufactured-solution convergence study (smooth case)");
  CLI::App* sim = app.add_subcommand("simulate", "cross or random-disk simulation with snapshots");
  CLI::App* proj = app.add_subcommand("project", "elliptic projection error study");

  // CLI11 treats --h and -h as the same name
  for (CLI::App* a : {&app, conv, sim, proj}) a->set_help_flag("--help", "print this help and exit");

  Options oc = add_common(conv, r);
  add_stepping(conv, r, oc);
  oc["levels"] = conv->add_option("--levels", r.levels, "mesh levels, e.g. 3..5 or 2,3,4");
  oc["dt-rule"] = conv->add_option("--dt-rule", r.dt_rule, "table: dt = 2 (h/sqrt2)^(k+2); fixed: use --dt")
                      ->check(CLI::IsMember({"table", "fixed"}));
  oc["case"] = conv->add_option("--case", r.case_name, "exact solution")->check(CLI::IsMember({"manufactured"}));

  Options os = add_common(sim, r);
  add_stepping(sim, r, os);
  os["case"] = sim->add_option("--case", r.case_name, "initial datum")->check(CLI::IsMember({"cross", "disk"}));
  os["h"] = sim->add_option("--h", r.h, "square side of the structured mesh (1/h squares per side)");
  os["snapshots"] = sim->add_option("--snapshots", r.snapshots, "comma-separated snapshot times (default: 12 evenly spaced)");
  os["resolution"] = sim->add_option("--resolution", r.resolution, "snapshot lattice size")->check(CLI::Range(1, 8192));
  os["a"] = sim->add_option("--a", r.a, "velocity profile steepness a");
  os["b"] = sim->add_option("--b", r.b, "velocity profile offset b");

  Options op = add_common(proj, r);
  op["levels"] = proj->add_option("--levels", r.levels, "mesh levels, e.g. 3..5");
  op["time"] = proj->add_option("--time", r.time, "time at which the exact solution is projected");
  op["case"] = proj->add_option("--case", r.case_name, "exact solution")->check(CLI::IsMember({"manufactured"}));

  if (args_in.empty()) throw UsageError("no subcommand given", usage_text(app));
  std::vector<std::string> args;
  try {
    args = expand_manifest(args_in);
  } catch (const ParameterError& e) {
    throw UsageError(e.what(), usage_text(app));
  }
  // CLI11 parses a reversed vector
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const CLI::App* s : {conv, sim, proj})
      if (s->parsed()) target = s;
    throw UsageError("help requested", usage_text(*target), true);
  } catch (const CLI::CallForVersion&) {
    throw UsageError("version requested", std::string(HDGCH_VERSION) + "\n", true);
  } catch (const CLI::ParseError& e) {
    const CLI::App* target = &app;
    for (const CLI::App* s : {conv, sim, proj})
      if (s->parsed()) target = s;
    throw UsageError(e.what(), usage_text(*target));
  }

  CliInvocation inv;
  inv.argv = args_in;
  const Options* o = nullptr;
  const CLI::App* active = nullptr;
  if (conv->parsed()) inv.subcommand = Subcommand::convergence, o = &oc, active = conv;
  if (sim->parsed()) inv.subcommand = Subcommand::simulate, o = &os, active = sim;
  if (proj->parsed()) inv.subcommand = Subcommand::project, o = &op, active = proj;

  auto usage = [&](const std::string& msg) { return UsageError(msg, usage_text(*active)); };
  try {
    RunConfig& c = inv.run;
    c.k = r.k;
    c.scheme = parse_scheme(r.scheme);
    c.alpha = r.alpha;
    c.tau_c = r.tau_c;
    c.threads = r.threads;
    c.preconditioner = parse_preconditioner(r.preconditioner);
    c.minres_abs_tol = r.minres_abs;
    c.minres_rel_tol = r.minres_rel;
    c.minres_max_iter = r.minres_max;
    c.newton_abs_tol = r.newton_tol;
    c.newton_max_iter = r.newton_max;
    c.seed = r.seed;
    inv.out = r.out;
    inv.check = r.check;
    if (!(r.minres_abs > 0) || !(r.minres_rel > 0)) throw usage("--minres-abs-tol/--minres-rel-tol must be positive");

    const bool table_defaults = inv.subcommand != Subcommand::simulate;
    const std::string default_levels = r.k == 0 ? "3..5" : "2..4";
    if (table_defaults) {
      inv.case_name = "manufactured";
      inv.levels = parse_levels(given(*o, "levels") ? r.levels : default_levels);
      c.pe = given(*o, "pe") ? r.pe : 3.0;
    }
    switch (inv.subcommand) {
      case Subcommand::convergence: {
        if (inv.levels.size() < 2) throw usage("--levels needs at least two levels for a rate");
        c.eps = given(*o, "eps") ? r.eps : 2.0;
        c.T = given(*o, "T") ? r.T : 0.5;
        std::string rule = r.dt_rule;
        if (rule.empty()) rule = given(*o, "dt") ? "fixed" : "table";
        if (rule == "fixed" && !given(*o, "dt")) throw usage("--dt-rule fixed requires --dt");
        if (rule == "table" && given(*o, "dt")) throw usage("--dt conflicts with --dt-rule table");
        inv.dt_rule = rule == "table";
        c.dt = inv.dt_rule ? table_time_step(c.k, inv.levels.back()) : r.dt;
        break;
      }
      case Subcommand::project:
        inv.time = r.time;
        if (!(r.time >= 0)) throw usage("--time must be nonnegative");
        c.eps = 1.0;
        c.T = r.time;
        break;
      case Subcommand::simulate: {
        inv.case_name = given(*o, "case") ? r.case_name : "cross";
        SimulationCase& sc = inv.simulation;
        sc.datum = parse_datum(inv.case_name);
        sc.a = r.a;
        sc.b = r.b;
        sc.seed = r.seed;
        sc.snapshot_resolution = r.resolution;
        if (!(r.h > 0) || r.h > 1) throw usage("--h must lie in (0, 1]");
        const double n = std::round(1.0 / r.h);
        if (std::abs(n * r.h - 1.0) > 1e-9) throw usage("--h must be the reciprocal of an integer, got " + num(r.h));
        inv.h = r.h;
        sc.subdivisions = static_cast<int>(n);
        c.pe = given(*o, "pe") ? r.pe : 200.0;
        c.eps = given(*o, "eps") ? r.eps : (sc.datum == InitialDatum::cross ? 0.01 : 0.005);
        c.dt = given(*o, "dt") ? r.dt : 1e-3;
        c.T = given(*o, "T") ? r.T : 5.0;
        c.validate();
        if (given(*o, "snapshots")) {
          sc.snapshot_times = parse_times(r.snapshots);
        } else {
          const int steps = c.num_steps();
          for (int i = 0; i < 12; ++i) sc.snapshot_times.push_back(std::llround(steps * i / 11.0) * c.dt);
        }
        for (double t : sc.snapshot_times)
          if (t < 0 || t > c.T * (1 + 1e-12)) throw usage("--snapshots: time " + num(t) + " outside [0, T]");
        break;
      }
    }
    c.validate();
  } catch (const ParameterError& e) {
    throw usage(e.what());
  }
  return inv;
}

std::vector<std::string> canonical_args(const CliInvocation& inv) {
  const RunConfig& c = inv.run;
  std::vector<std::string> a{to_string(inv.subcommand)};
  auto add = [&](const std::string& flag, const std::string& v) {
    a.push_back(flag);
    a.push_back(v);
  };
  add("--k", std::to_string(c.k));
  add("--scheme", to_string(c.scheme));
  add("--alpha", num(c.alpha));
  add("--tau-c", num(c.tau_c));
  add("--pe", num(c.pe));
  add("--threads", std::to_string(c.threads));
  add("--out", inv.out);
  add("--preconditioner", to_string(c.preconditioner));
  add("--minres-abs-tol", num(c.minres_abs_tol));
  add("--minres-rel-tol", num(c.minres_rel_tol));
  add("--minres-max-iter", std::to_string(c.minres_max_iter));
  if (inv.check) a.push_back("--check");
  auto levels = [&] {
    std::string s;
    for (std::size_t i = 0; i < inv.levels.size(); ++i) s += (i ? "," : "") + std::to_string(inv.levels[i]);
    return s;
  };
  auto stepping = [&] {
    add("--eps", num(c.eps));
    add("--T", num(c.T));
    add("--seed", std::to_string(c.seed));
    add("--newton-tol", num(c.newton_abs_tol));
    add("--newton-max-iter", std::to_string(c.newton_max_iter));
  };
  switch (inv.subcommand) {
    case Subcommand::convergence:
      stepping();
      add("--case", inv.case_name);
      add("--levels", levels());
      add("--dt-rule", inv.dt_rule ? "table" : "fixed");
      if (!inv.dt_rule) add("--dt", num(c.dt));
      break;
    case Subcommand::project:
      add("--case", inv.case_name);
      add("--levels", levels());
      add("--time", num(inv.time));
      break;
    case Subcommand::simulate: {
      stepping();
      add("--dt", num(c.dt));
      add("--case", inv.case_name);
      add("--h", num(inv.h));
      add("--resolution", std::to_string(inv.simulation.snapshot_resolution));
      add("--a", num(inv.simulation.a));
      add("--b", num(inv.simulation.b));
      std::string s;
      for (std::size_t i = 0; i < inv.simulation.snapshot_times.size(); ++i)
        s += (i ? "," : "") + num(inv.simulation.snapshot_times[i]);
      add("--snapshots", s);
      break;
    }
  }
  return a;
}

namespace {

json config_json(const CliInvocation& inv) {
  const RunConfig& c = inv.run;
  json j = {{"k", c.k},
            {"scheme", to_string(c.scheme)},
            {"alpha", c.alpha},
            {"tau_c", c.tau_c},
            {"pe", c.pe},
            {"eps", c.eps},
            {"dt", c.dt},
            {"T", c.T},
            {"seed", c.seed},
            {"threads", c.threads},
            {"case", inv.case_name},
            {"preconditioner", to_string(c.preconditioner)},
            {"newton_abs_tol", c.newton_abs_tol},
            {"newton_max_iter", c.newton_max_iter},
            {"minres_abs_tol", c.minres_abs_tol},
            {"minres_rel_tol", c.minres_rel_tol},
            {"minres_max_iter", c.minres_max_iter},
            {"check", inv.check}};
  switch (inv.subcommand) {
    case Subcommand::convergence:
      j["levels"] = inv.levels;
      j["dt_rule"] = inv.dt_rule ? "table" : "fixed";
      if (inv.dt_rule) {
        json per = json::object();
        for (int l : inv.levels) per[std::to_string(l)] = table_time_step(c.k, l);
        j["dt_per_level"] = per;
      }
      break;
    case Subcommand::project:
      j["levels"] = inv.levels;
      j["time"] = inv.time;
      break;
    case Subcommand::simulate:
      j["h"] = inv.h;
      j["subdivisions"] = inv.simulation.subdivisions;
      j["steps"] = c.num_steps();
      j["snapshot_times"] = inv.simulation.snapshot_times;
      j["snapshot_resolution"] = inv.simulation.snapshot_resolution;
      j["velocity_a"] = inv.simulation.a;
      j["velocity_b"] = inv.simulation.b;
      break;
  }
  return j;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  f.close();
  if (!f) throw ResourceError("cannot write " + p.string());
}

struct RateThresholds {
  double u_min, phi_min;
};

// finest-pair rate checks; q and p within 0.15 of k+1
json check_rates(const ErrorNorms& rate, int k, Scheme scheme, bool& ok) {
  const double opt = k + 2, flux = k + 1;
  RateThresholds t{opt - 0.15, opt - 0.15};
  if (scheme == Scheme::upwind) {
    t.phi_min = (k == 0 ? flux : opt) - 0.15;
    t.u_min = (k == 0 ? flux : opt) - 0.15;
  }
  json j = json::array();
  auto one = [&](const std::string& name, double v, double lo, double hi) {
    const bool pass = std::isfinite(v) && v >= lo && v <= hi;
    ok = ok && pass;
    j.push_back({{"quantity", name}, {"rate", std::isfinite(v) ? json(v) : json(nullptr)}, {"min", lo}, {"max", hi}, {"pass", pass}});
  };
  const double inf = 1e300;
  one("u", rate.u, t.u_min, inf);
  one("phi", rate.phi, t.phi_min, inf);
  one("q", rate.q, flux - 0.15, flux + 0.15);
  one("p", rate.p, flux - 0.15, flux + 0.15);
  return j;
}

}  // namespace

ExitCode run_invocation(const CliInvocation& inv, std::ostream& log) {
  const fs::path dir(inv.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create output directory " + dir.string() + ": " + ec.message());

  json manifest = {{"program", "hdgch"},
                   {"version", HDGCH_VERSION},
                   {"git_commit", HDGCH_GIT_COMMIT},
                   {"subcommand", to_string(inv.subcommand)},
                   {"argv", inv.argv},
                   {"canonical_args", canonical_args(inv)},
                   {"seed", inv.run.seed},
                   {"config", config_json(inv)}};
  json outputs = json::array();
  ExitCode code = ExitCode::success;
  auto progress = [&](const std::string& s) { log << s << std::endl; };
  auto finish = [&](const std::string& status) {
    manifest["outputs"] = outputs;
    manifest["status"] = status;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  };

  try {
    switch (inv.subcommand) {
      case Subcommand::convergence: {
        const auto rows = run_convergence(inv.run, inv.levels, smooth_case(), inv.dt_rule, progress);
        std::ostringstream csv;
        write_convergence_csv(rows, csv);
        write_text(dir / "convergence.csv", csv.str());
        outputs.push_back("convergence.csv");
        for (const auto& r : rows)
          if (r.failed) {
            log << "level " << r.level << " failed: " << r.failure << "\n";
            code = ExitCode::solver_failure;
          }
        if (inv.check && code == ExitCode::success) {
          bool ok = true;
          manifest["check"] = check_rates(rows.back().rate, inv.run.k, inv.run.scheme, ok);
          log << "check: " << (ok ? "PASS" : "FAIL") << "\n";
          if (!ok) code = ExitCode::check_failure;
        }
        break;
      }
      case Subcommand::project: {
        ProjectionParams p;
        p.pe = inv.run.pe;
        p.alpha = inv.run.alpha;
        p.tau_c = inv.run.tau_c;
        p.scheme = inv.run.scheme;
        p.time = inv.time;
        p.solver = inv.run.solver_options();
        const auto rows = projection_error_study(smooth_case(), inv.levels, inv.run.k, p, progress);
        std::ostringstream csv;
        write_projection_csv(rows, csv);
        write_text(dir / "projection.csv", csv.str());
        outputs.push_back("projection.csv");
        if (inv.check) {
          bool ok = rows.size() >= 2;
          if (ok) manifest["check"] = check_rates(rows.back().rate, inv.run.k, inv.run.scheme, ok);
          log << "check: " << (ok ? "PASS" : "FAIL") << "\n";
          if (!ok) code = ExitCode::check_failure;
        }
        break;
      }
      case Subcommand::simulate: {
        const SimulationResult res = run_simulation(inv.simulation, inv.run, dir.string(), progress);
        outputs.push_back("diagnostics.csv");
        for (const auto& s : res.snapshots) {
          outputs.push_back(s + ".csv");
          outputs.push_back(s + ".vtk");
        }
        double drift = 0;
        for (const auto& d : res.diagnostics) drift = std::max(drift, std::abs(d.mass - res.diagnostics.front().mass));
        manifest["max_mass_drift"] = drift;
        if (res.failed) {
          log << "simulation failed: " << res.failure << "\n";
          manifest["failure"] = res.failure;
          code = ExitCode::solver_failure;
        } else if (inv.check) {
          const bool ok = drift <= 1e-10;
          manifest["check"] = {{"quantity", "mass drift"}, {"value", drift}, {"max", 1e-10}, {"pass", ok}};
          log << "check: " << (ok ? "PASS" : "FAIL") << " (mass drift " << drift << ")\n";
          if (!ok) code = ExitCode::check_failure;
        }
        break;
      }
    }
  } catch (const Error& e) {
    manifest["failure"] = e.what();
    finish("solver_failure");
    throw;
  }
  finish(code == ExitCode::success ? "ok" : code == ExitCode::check_failure ? "check_failure" : "solver_failure");
  return code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliInvocation inv;
  try {
    inv = parse_config(args);
  } catch (const UsageError& e) {
    if (e.help()) {
      out << e.usage();
      return static_cast<int>(ExitCode::success);
    }
    err << "hdgch: " << e.what() << "\n\n" << e.usage();
    return static_cast<int>(ExitCode::usage);
  }
  try {
    return static_cast<int>(run_invocation(inv, out));
  } catch (const Error& e) {
    err << "hdgch: " << e.what() << "\n";
    return static_cast<int>(ExitCode::solver_failure);
  }
}

}  // namespace hdgch
