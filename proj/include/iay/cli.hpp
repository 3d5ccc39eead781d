#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iay/iay.hpp"

namespace iay {

struct RunConfig {
  std::string command;
  std::string measures;
  std::string out_dir = "out";
  std::string out;  // main output file; relative names land in out_dir
  double grid_step = 0.01;
  std::vector<double> extra_points;
  int refine_points = 2001;
  std::uint64_t paths = 200000;
  double dt = 0.0;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::uint64_t max_steps = 10000000;
  bool stepping = false;
  bool no_dump = false;
  bool mc = false;
  double sigmas = 3.0;
  std::string payoff = "identity";
  std::size_t payoff_points = 2001;
  std::string joint;
  bool isotonic = false;
};

namespace cli_detail {

// Exit codes: 0 all checks pass, 2 some check failed, 1 bad input or usage.
constexpr int kPass = 0;
constexpr int kInput = 1;
constexpr int kFail = 2;

// Multiple of sqrt(dt) added to Monte Carlo thresholds under time stepping.
constexpr double kCrossingAllowance = 1.5;

inline std::string out_path(const RunConfig& c, const std::string& fallback) {
  const std::string name = c.out.empty() ? fallback : c.out;
  const std::filesystem::path p(name);
  if (p.is_absolute()) return name;
  return (std::filesystem::path(c.out_dir) / p).string();
}

inline std::string side_path(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.out_dir) / name).string();
}

inline SearchOptions search_options(const RunConfig& c) {
  SearchOptions so;
  so.refine_points = c.refine_points;
  return so;
}

inline MarginalSequence load(const RunConfig& c, bool check_order = true) {
  if (c.measures.empty()) throw InputError("no measure file given (positional argument or --measures)");
  return parse_measures(c.measures, check_order);
}

inline BoundarySet boundaries_for(const RunConfig& c, const MarginalSequence& seq,
                                  std::ostream& err) {
  BoundarySet b = compute_boundaries(seq, build_y_grid(seq, c.grid_step, c.extra_points),
                                     search_options(c));
  if (c.isotonic) isotonic_fix(b, err);
  return b;
}

inline bool atomic(const MarginalSequence& seq) { return all_atomic(seq); }

inline json jumps_json(const BoundarySet& b) {
  json a = json::array();
  for (int i = 0; i < b.levels(); ++i) a.push_back(b.jumps[i]);
  return a;
}

inline Check make_check(const std::string& name, double stat, double thr, bool pass,
                        const std::string& note) {
  Check c;
  c.name = name;
  c.statistic = stat;
  c.threshold = thr;
  c.pass = pass;
  c.note = note;
  return c;
}

// ---------------------------------------------------------------------------

inline int cmd_validate(const RunConfig& c, std::ostream& out) {
  const MarginalSequence seq = load(c, false);
  const ValidationReport v = validate_sequence(seq);
  json ms = json::array();
  for (std::size_t i = 0; i < seq.size(); ++i)
    ms.push_back({{"index", i + 1},
                  {"kind", seq[i].is_curve() ? "call_curve" : "atoms"},
                  {"support_points", seq[i].size()},
                  {"l", seq[i].l()},
                  {"r", seq[i].r()},
                  {"mean", seq[i].mean()}});
  json j = {{"input", c.measures}, {"measures", ms}, {"report", to_json(v)}, {"pass", v.pass()}};
  write_json(out_path(c, "validate.json"), j);
  out << "validate: " << (v.pass() ? "pass" : "FAIL") << " (" << seq.size() << " measures)\n";
  return v.pass() ? kPass : kFail;
}

inline int cmd_boundaries(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const MarginalSequence seq = load(c);
  const BoundarySet b = boundaries_for(c, seq, err);
  write_text(out_path(c, "boundaries.csv"), boundaries_csv(b));
  const DiagnosticsReport d = assumption_diagnostics(b);
  const OdeReport ode = ode_residual(b);
  json res = json::array();
  for (int i = 1; i <= b.levels(); ++i) res.push_back(ode.max_ode(i));
  json j = {{"input", c.measures},
            {"levels", b.levels()},
            {"grid_points", b.size()},
            {"grid_step", c.grid_step},
            {"jumps", jumps_json(b)},
            {"diagnostics", to_json(d)},
            {"ode_max_residual", res},
            {"foc_max_residual", ode.max_foc()}};
  write_json(side_path(c, "boundaries.json"), j);
  out << "boundaries: " << b.levels() << " levels on " << b.size() << " grid points; diagnostics "
      << (d.pass() ? "pass" : "flagged") << " (" << d.flags.size() << " flags)\n";
  return kPass;
}

inline json level_summary(const PathEnsemble& e, const BoundarySet& b) {
  json a = json::array();
  const auto laws = level_laws(e);
  for (int i = 1; i <= e.n_levels; ++i) {
    double mm = 0.0, mx = 0.0;
    for (const auto& p : e.paths) {
      mm += p.weight * p.levels[i - 1].m;
      mx += p.weight * p.levels[i - 1].max_lo;
    }
    const MaxLawResult ml = max_law_check(laws[i - 1], b, i);
    json lv = {{"level", i}, {"mean_value", mm}, {"mean_max", mx}, {"max_tail_sup_dev", ml.sup_dev}};
    if (all_atomic(b.seq)) {
      json masses = json::array();
      for (const Atom& at : b.seq[i - 1].atoms())
        masses.push_back({{"x", at.x}, {"target", at.w}, {"empirical", laws[i - 1].mass_near(at.x)}});
      lv["masses"] = masses;
    }
    a.push_back(lv);
  }
  return a;
}

inline SimOptions sim_options(const RunConfig& c) {
  SimOptions o;
  o.n_paths = c.paths;
  o.dt = c.dt;
  o.seed = c.seed;
  o.max_steps = c.max_steps;
  o.exact_exit = !c.stepping;
  return o;
}

inline PathEnsemble run_sim(const RunConfig& c, const BoundarySet& b) {
  const SimOptions o = sim_options(c);
  return c.stepping ? simulate_stepping(b, o) : simulate(b, o);
}

inline int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (!c.seed_given) throw InputError("simulate needs --seed");
  const MarginalSequence seq = load(c);
  const BoundarySet b = boundaries_for(c, seq, err);
  const PathEnsemble e = run_sim(c, b);
  json meta;
  if (!c.no_dump) meta = write_mc_dump(out_path(c, "mc.bin"), e);
  json j = {{"input", c.measures},
            {"paths", c.paths},
            {"kept", e.paths.size()},
            {"truncated", e.meta.truncated},
            {"seed", c.seed},
            {"dt", e.meta.dt},
            {"exact_exit", e.meta.exact_exit},
            {"levels", level_summary(e, b)}};
  if (!meta.is_null()) j["dump"] = meta;
  write_json(side_path(c, "simulate.json"), j);
  out << "simulate: " << e.paths.size() << " paths ("
      << (e.meta.exact_exit ? "exact exit" : "time stepping") << ")\n";
  return kPass;
}

inline int cmd_oracle(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const MarginalSequence seq = load(c);
  require_atomic(seq);
  const BoundarySet b = boundaries_for(c, seq, err);
  const auto steps = level_steps(seq, search_options(c));
  const ExitProgram prog = program_from_steps(steps);
  const auto laws = exact_level_laws_program(prog, 0.0, b.y);
  write_text(out_path(c, "oracle_laws.csv"), law_csv(laws));
  write_text(side_path(c, "oracle_tails.csv"), tail_csv(laws, b.y));
  json st = json::array();
  for (const auto& s : steps) st.push_back(to_json(s));
  json tot = json::array();
  for (const auto& l : laws) tot.push_back(l.total());
  write_json(side_path(c, "oracle.json"),
             {{"input", c.measures}, {"step_boundaries", st}, {"total_mass", tot}});
  out << "oracle: exact laws for " << laws.size() << " levels\n";
  return kPass;
}

inline int cmd_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const MarginalSequence seq = load(c);
  const BoundarySet b = boundaries_for(c, seq, err);
  const DiagnosticsReport d = assumption_diagnostics(b);
  CheckReport rep;
  const int n = b.levels();
  const bool exact = atomic(seq);
  if (exact) {
    const ExitProgram prog = program_from_steps(level_steps(seq, search_options(c)));
    const auto laws = exact_level_laws_program(prog, 0.0, b.y);
    for (int i = 1; i <= n; ++i) {
      const double tv = compare_law(laws[i - 1], seq[i - 1]).tv.value_or(1.0);
      rep.checks.push_back(make_check("law_level_" + std::to_string(i), tv, 1e-12, tv <= 1e-12,
                                      "total variation of the exact law against the marginal"));
      const MaxLawResult ml = max_law_check(laws[i - 1], b, i);
      rep.checks.push_back(make_check("max_law_level_" + std::to_string(i), ml.sup_dev, 1e-10,
                                      ml.sup_dev <= 1e-10 && ml.undecided == 0,
                                      "sup |P[max >= y] - K(y)| away from jumps"));
    }
    const CheckReport rel = relation_check_exact(prog, b);
    for (const auto& ch : rel.checks) rep.checks.push_back(ch);
  }
  if (c.mc || !exact) {
    const PathEnsemble e = run_sim(c, b);
    const auto laws = level_laws(e);
    const double N = static_cast<double>(e.paths.size());
    // Time stepping misses crossings between steps; exact exit does not.
    const double allowance = e.meta.exact_exit ? 0.0 : kCrossingAllowance * std::sqrt(e.meta.dt);
    for (int i = 1; i <= n; ++i) {
      if (exact) {
        LevelLaw ref;
        for (const Atom& a : seq[i - 1].atoms()) ref.items.push_back({LevelRecord{a.x, 0, 0}, a.w});
        const MassComparison mc = compare_masses(laws[i - 1], ref, N, c.sigmas);
        rep.checks.push_back(make_check("mc_masses_level_" + std::to_string(i), mc.max_z, c.sigmas,
                                        mc.pass, "largest z-score of atom masses"));
      } else {
        const LawComparison lc = compare_law(laws[i - 1], seq[i - 1], 1e-9, false);
        const double thr = 0.01 + 1.63 / std::sqrt(N) + allowance;
        rep.checks.push_back(make_check("mc_ks_level_" + std::to_string(i), lc.ks, thr,
                                        lc.ks <= thr,
                                        "Kolmogorov distance to the marginal; threshold includes a "
                                        "crossing allowance of " + fmt17(allowance)));
      }
      const MaxLawResult ml = max_law_check(laws[i - 1], b, i);
      const double thr = 0.01 + allowance;
      rep.checks.push_back(make_check("mc_max_law_level_" + std::to_string(i), ml.sup_dev, thr,
                                      ml.sup_dev <= thr,
                                      "sup |empirical tail - K| away from jumps; crossing allowance " +
                                          fmt17(allowance)));
    }
  }
  json j = {{"input", c.measures},
            {"exact", exact},
            {"diagnostics", to_json(d)},
            {"checks", to_json(rep)["checks"]},
            {"pass", rep.pass()}};
  write_json(out_path(c, "verify.json"), j);
  out << "verify: " << (rep.pass() ? "pass" : "FAIL");
  std::size_t failed = 0;
  for (const auto& ch : rep.checks) failed += ch.pass ? 0 : 1;
  out << " (" << rep.checks.size() - failed << "/" << rep.checks.size() << " checks)";
  if (!d.pass()) out << "; assumption diagnostics flagged " << d.flags.size() << " points";
  out << "\n";
  return rep.pass() ? kPass : kFail;
}

inline Payoff payoff_for(const RunConfig& c, double hi) {
  if (c.payoff == "identity") return identity_payoff(hi, c.payoff_points);
  if (c.payoff.rfind("digital:", 0) == 0) {
    std::stringstream ss(c.payoff.substr(8));
    std::string a, w;
    std::getline(ss, a, ':');
    std::getline(ss, w, ':');
    try {
      const double k = std::stod(a);
      const double width = w.empty() ? 0.01 : std::stod(w);
      if (!(width > 0.0)) throw InputError("--payoff digital width must be positive");
      return smoothed_digital(k, width, hi, c.payoff_points);
    } catch (const std::logic_error&) {
      throw InputError("--payoff: cannot read '" + c.payoff + "' (expected digital:K[:W])");
    }
  }
  throw InputError("--payoff: unknown payoff '" + c.payoff + "' (identity or digital:K[:W])");
}

inline int cmd_price(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const MarginalSequence seq = load(c);
  const BoundarySet b = boundaries_for(c, seq, err);
  const auto table = barrier_table(b, b.y);
  write_text(out_path(c, "price.csv"), barrier_csv(table));
  double rmax = 0.0;
  for (const Marginal& m : seq) rmax = std::max(rmax, m.r());
  const Payoff pay = payoff_for(c, std::max(rmax, 1e-9));
  pay.validate();
  const double lb = lookback_bound(b, pay);
  double resid = 0.0;
  for (const auto& r : table) resid = std::max(resid, r.residual);

  SuperhedgeResult sh;
  json audit = {{"max_telescoping_residual", resid}, {"telescoping_tolerance", kIdentityTol}};
  if (atomic(seq)) {
    const ExitProgram prog = program_from_steps(level_steps(seq, search_options(c)));
    sh = superhedge_check_exact(prog, b, pay);
    audit["superhedge_source"] = "oracle";
    if (c.payoff == "identity") {
      const auto laws = exact_level_laws_program(prog);
      if (auto mm = mean_max(laws.back())) audit["oracle_mean_max"] = *mm;
    }
  } else {
    if (!c.seed_given) throw InputError("price on curve input needs --seed for the hedge audit");
    sh = superhedge_check(run_sim(c, b), b, pay);
    audit["superhedge_source"] = "monte_carlo";
  }
  const bool ok = sh.min_slack >= -1e-12 && sh.undecided == 0;
  audit["superhedge"] = {{"min_slack", sh.min_slack}, {"mean_hedge", sh.mean_hedge},
                         {"bound", sh.bound},         {"mean_payoff", sh.mean_payoff},
                         {"undecided", sh.undecided}, {"nodes", sh.nodes.size()},
                         {"pass", ok}};
  json j = {{"input", c.measures},
            {"payoff", c.payoff},
            {"payoff_points", c.payoff_points},
            {"lookback_bound", lb},
            {"barrier_csv", std::filesystem::path(out_path(c, "price.csv")).filename().string()},
            {"audit", audit},
            {"pass", ok}};
  write_json(side_path(c, "price.json"), j);
  out << "price: lookback bound " << fmt17(lb) << "; superhedge min slack " << fmt17(sh.min_slack)
      << (ok ? "" : " (FAIL)") << "\n";
  return ok ? kPass : kFail;
}

inline int cmd_counterexample(const RunConfig& c, std::ostream& out) {
  const SearchOptions so = search_options(c);
  const CounterexampleReport rep = counterexample_suite(so);
  const MarginalSequence seq = counterexample_measures();
  const BoundarySet b = compute_boundaries(seq, build_y_grid(seq, c.grid_step, c.extra_points), so);
  write_text(side_path(c, "counterexample_boundaries.csv"), boundaries_csv(b));

  const auto naive = exact_level_laws_program(program_from_steps(rep.naive_steps));
  const auto prog = exact_level_laws_program(counterexample_program());
  auto law_json = [](const std::vector<LevelLaw>& laws) {
    json a = json::array();
    for (const auto& l : laws) {
      json lv = json::array();
      for (const auto& [x, w] : l.values()) lv.push_back({x, w});
      a.push_back(lv);
    }
    return a;
  };
  json st = json::array();
  for (const auto& s : rep.naive_steps) st.push_back(to_json(s));
  // The naive embedding check: the iterated boundaries must embed every
  // marginal. On this triple they do not, and that is the expected outcome.
  double worst = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i)
    worst = std::max(worst, compare_law(naive[i], seq[i]).tv.value_or(1.0));
  const bool naive_ok = worst <= 1e-12;
  json j = {{"measures", sequence_to_json(seq)},
            {"naive_step_boundaries", st},
            {"naive_laws", law_json(naive)},
            {"program_laws", law_json(prog)},
            {"naive_embedding", {{"max_tv", worst}, {"pass", naive_ok}}},
            {"suite", to_json(rep.checks)}};
  write_json(out_path(c, "counterexample.json"), j);
  out << "counterexample: naive embedding " << (naive_ok ? "pass" : "FAILS (expected)")
      << ", max total variation " << fmt17(worst) << "\n";
  for (const auto& ch : rep.checks.checks)
    out << "  " << ch.name << ": " << (ch.pass ? "as expected" : "NOT as expected") << " ("
        << ch.note << ")\n";
  return naive_ok ? kPass : kFail;
}

inline JointLaw12 read_joint(const std::string& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": JSON parse error: " + e.what());
  }
  if (!j.is_array()) throw InputError(path + ": joint law must be an array of {max1, m2, w}");
  JointLaw12 out;
  out.source = JointLaw12::Source::MonteCarlo;
  for (const auto& it : j) {
    if (!it.is_object() || !it.contains("max1") || !it.contains("m2") || !it.contains("w"))
      throw InputError(path + ": joint law entries need max1, m2 and w");
    const double mx = it["max1"].get<double>();
    out.items.push_back({LevelRecord{0.0, mx, mx}, it["m2"].get<double>(), it["w"].get<double>()});
  }
  if (std::abs(out.total() - 1.0) > 1e-9) throw InputError(path + ": joint law weights do not sum to 1");
  return out;
}

inline int cmd_correct_n3(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const MarginalSequence seq = c.measures.empty() ? counterexample_measures() : load(c);
  if (seq.size() != 3) throw InputError("correct-n3 needs exactly three measures");
  const SearchOptions so = search_options(c);
  const BoundarySet b = boundaries_for(c, seq, err);
  const auto ws = jump_windows(b);
  const bool exact = atomic(seq);
  JointLaw12 joint;
  if (exact)
    joint = joint_law_exact(tau_prime_program(seq, ws, so));
  else if (!c.joint.empty())
    joint = read_joint(c.joint);
  else
    throw InputError("correct-n3 on curve input needs --joint (law of the first maximum and M_2)");

  const CorrectedBoundary cb = corrected_boundary(seq, joint, ws, b.y, so);
  std::ostringstream csv;
  csv << "y,xi3_tilde,K3_tilde\n";
  for (std::size_t k = 0; k < cb.y.size(); ++k)
    csv << fmt17(cb.y[k]) << "," << fmt17(cb.xi3[k]) << "," << fmt17(cb.K3[k]) << "\n";
  write_text(out_path(c, "corrected_n3.csv"), csv.str());

  CheckReport rep;
  if (exact) {
    rep = verify_corrected(cb, seq, joint, so);
  } else {
    double foc = 0.0;
    for (double r : cb.foc_residual) foc = std::max(foc, r);
    rep.checks.push_back(make_check("first_order_condition", foc, 1e-9, foc <= 1e-9,
                                    "one-sided derivatives bracket -K~3"));
    rep.checks.push_back(make_check("monotone", cb.worst_decrease, 1e-9, !cb.non_monotone,
                                    "largest decrease of xi~3 between grid points"));
  }
  json win = json::array();
  for (const auto& w : ws)
    win.push_back({{"y_lo", w.y_lo}, {"y_hi", w.y_hi}, {"z_lo", w.z_lo}, {"z_hi", w.z_hi},
                   {"ignored", w.ignored}, {"overlap", w.overlap}});
  std::size_t active = 0;
  for (char a : cb.active) active += a ? 1 : 0;
  json j = {{"input", c.measures.empty() ? std::string("built-in counterexample") : c.measures},
            {"joint_source", joint.source == JointLaw12::Source::Oracle ? "oracle" : "monte_carlo"},
            {"windows", win},
            {"active_points", active},
            {"flags", cb.flags},
            {"verification", to_json(rep)},
            {"pass", rep.pass()}};
  write_json(side_path(c, "corrected_n3.json"), j);
  out << "correct-n3: " << ws.size() << " window(s), " << active << " active grid points; checks "
      << (rep.pass() ? "pass" : "FAIL") << "\n";
  return rep.pass() ? kPass : kFail;
}

// Turns a JSON config object into command-line flags placed ahead of the
// user's own flags, so the latter win.
inline std::vector<std::string> config_args(const json& cfg, const std::string& path) {
  std::vector<std::string> a;
  for (const auto& [key, val] : cfg.items()) {
    if (key == "command") continue;
    std::string flag = "--" + key;
    for (char& ch : flag)
      if (ch == '_') ch = '-';
    if (val.is_boolean()) {
      if (val.get<bool>()) a.push_back(flag);
    } else if (val.is_array()) {
      for (const auto& v : val) {
        a.push_back(flag);
        a.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else if (val.is_string()) {
      a.push_back(flag);
      a.push_back(val.get<std::string>());
    } else if (val.is_number()) {
      a.push_back(flag);
      a.push_back(val.is_number_float() ? fmt17(val.get<double>()) : val.dump());
    } else {
      throw InputError(path + ": config key '" + key + "' has an unsupported value");
    }
  }
  return a;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  using namespace cli_detail;
  std::vector<std::string> args(argv + 1, argv + argc);

  // --config is handled before parsing.
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) {
        err << "error: --config needs a file\n";
        return kInput;
      }
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  std::vector<std::string> final_args;
  try {
    std::vector<std::string> from_cfg;
    std::string command;
    if (!args.empty() && args[0].rfind("-", 0) != 0) command = args[0];
    if (!config_path.empty()) {
      json cfg;
      try {
        cfg = json::parse(read_text(config_path));
      } catch (const json::parse_error& e) {
        throw InputError(config_path + ": JSON parse error: " + e.what());
      }
      if (!cfg.is_object()) throw InputError(config_path + ": config must be a JSON object");
      if (command.empty() && cfg.contains("command")) command = cfg["command"].get<std::string>();
      from_cfg = config_args(cfg, config_path);
    }
    if (!command.empty()) final_args.push_back(command);
    final_args.insert(final_args.end(), from_cfg.begin(), from_cfg.end());
    const std::size_t skip = (!args.empty() && args[0] == command) ? 1 : 0;
    final_args.insert(final_args.end(), args.begin() + static_cast<long>(skip), args.end());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }

  RunConfig c;
  CLI::App app{"Iterated Azema-Yor embeddings: boundaries, exact laws, Monte Carlo, bounds"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto common = [&](CLI::App* s, bool measures = true) {
    if (measures) s->add_option("measures,--measures", c.measures, "measure sequence JSON file");
    s->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
    s->add_option("--out", c.out, "main output file name");
    s->add_option("--grid-step", c.grid_step, "uniform y-grid step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--extra-points", c.extra_points, "extra y-grid points")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--refine-points", c.refine_points, "safety-net points per minimization")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    s->add_flag("--isotonic", c.isotonic, "monotone post-processing of boundaries (warns)");
  };
  auto mc = [&](CLI::App* s) {
    s->add_option("--paths", c.paths, "Monte Carlo paths")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--dt", c.dt, "time step (0: automatic)")->check(CLI::NonNegativeNumber);
    s->add_option("--seed", c.seed, "random seed")->each([&](const std::string&) { c.seed_given = true; });
    s->add_option("--max-steps", c.max_steps, "step cap per path")->check(CLI::PositiveNumber);
    s->add_flag("--stepping", c.stepping, "time stepping even for atomic inputs");
  };

  auto* v = app.add_subcommand("validate", "check centring and convex order");
  common(v);
  auto* bo = app.add_subcommand("boundaries", "compute xi_i, K_i, j_n on a y grid");
  common(bo);
  auto* si = app.add_subcommand("simulate", "Monte Carlo run of the iterated embedding");
  common(si);
  mc(si);
  si->add_flag("--no-dump", c.no_dump, "skip the binary record dump");
  auto* orc = app.add_subcommand("oracle", "exact laws for atomic inputs");
  common(orc);
  auto* ve = app.add_subcommand("verify", "embedding and structural checks");
  common(ve);
  mc(ve);
  ve->add_flag("--mc", c.mc, "also compare a Monte Carlo run (atomic inputs)");
  ve->add_option("--sigmas", c.sigmas, "binomial band width")->check(CLI::PositiveNumber);
  auto* pr = app.add_subcommand("price", "robust barrier and lookback bounds with hedge audit");
  common(pr);
  mc(pr);
  pr->add_option("--payoff", c.payoff, "identity or digital:K[:W]")->capture_default_str();
  pr->add_option("--payoff-points", c.payoff_points, "payoff grid points")
      ->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));
  auto* ce = app.add_subcommand("counterexample", "the three-marginal counterexample end to end");
  common(ce, false);
  auto* cn = app.add_subcommand("correct-n3", "corrected third boundary around xi_2 jumps");
  common(cn);
  cn->add_option("--joint", c.joint, "joint law file for curve inputs");

  std::vector<const char*> cargv = {argv[0]};
  for (const auto& s : final_args) cargv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kPass;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }

  try {
    std::filesystem::create_directories(c.out_dir);
    if (v->parsed()) return cmd_validate(c, out);
    if (bo->parsed()) return cmd_boundaries(c, out, err);
    if (si->parsed()) return cmd_simulate(c, out, err);
    if (orc->parsed()) return cmd_oracle(c, out, err);
    if (ve->parsed()) return cmd_verify(c, out, err);
    if (pr->parsed()) return cmd_price(c, out, err);
    if (ce->parsed()) return cmd_counterexample(c, out);
    if (cn->parsed()) return cmd_correct_n3(c, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const NoMinimizer& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const NonStepBoundary& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const GridCoverage& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  } catch (const IdentityMismatch& e) {
    err << "check failed: " << e.what() << "\n";
    return kFail;
  } catch (const SimulationFailure& e) {
    err << "check failed: " << e.what() << "\n";
    return kFail;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}

}  // namespace iay
