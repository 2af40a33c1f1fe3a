#include "psiland/commands.hpp"

#include "psiland/bubbles.hpp"
#include "psiland/critpoints.hpp"
#include "psiland/domain_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace psiland {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct RunOptions {
  std::string command;
  std::string domain_file;
  int dim = 0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string regime = "sub";
  QuadratureConfig quad;
  CritConfig crit;
  std::optional<double> c2_nodal;
  std::vector<double> params;
  std::vector<double> xi;
  std::vector<double> zeta;
  std::optional<double> d;
  int boundary_samples = 256;
  double rho = 0.05;
  int trials = 5;
  std::vector<int> axes{0, 1};
  std::vector<double> range_a{-1.0, 1.0, 21.0};
  std::vector<double> range_b{-1.0, 1.0, 21.0};
  std::vector<double> fixed;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : out_(path, std::ios::binary) {
    require(bool(out_), "cannot open " + path.string() + " for writing");
  }
  void comment(const std::string& text) { out_ << "# " << text << '\n'; }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Vector to_vector(const std::vector<double>& v) {
  Vector x(int(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x(int(i)) = v[i];
  return x;
}

Domain load(const RunOptions& o) {
  require(!o.domain_file.empty(), "--domain is required for this command");
  Domain d = load_domain(o.domain_file);
  if (o.dim != 0)
    require(o.dim == d.dimension(), "--dim does not match the dimension of the domain file");
  return d;
}

fs::path out_dir(const RunOptions& o) {
  fs::path p(o.out_dir);
  fs::create_directories(p);
  return p;
}

QuadratureConfig quad_of(const RunOptions& o) {
  QuadratureConfig q = o.quad;
  q.seed = o.seed;
  q.validate();
  return q;
}

std::vector<double> default_params(const std::string& regime, bool expansion) {
  if (expansion) {
    if (regime == "hole") return {1e-2, 5e-3, 2.5e-3};
    return {0.1, 0.05, 0.025};
  }
  if (regime == "hole") return {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
}

// Concentration point for the subcritical regime: the given --xi or the
// global minimum of psi.
Vector concentration_point(const Domain& domain, const RunOptions& o,
                           const QuadratureConfig& quad) {
  if (!o.xi.empty()) {
    require(int(o.xi.size()) == domain.dimension(), "--xi has the wrong length");
    return to_vector(o.xi);
  }
  std::vector<CriticalPoint> mins = find_minima(domain, o.crit, quad);
  if (mins.empty()) throw ConvergenceError("no minimum of psi found from any seed");
  return mins.front().location;
}

// ---------------------------------------------------------------------------

int cmd_constants(const RunOptions& o) {
  require(o.dim >= 3 && o.dim <= kMaxDim, "constants: --dim must be in [3, 8]");
  ModelConstants k = constants(o.dim, o.c2_nodal);
  CsvWriter csv(out_dir(o) / "constants.csv");
  csv.row({"name", "value", "provenance"});
  for (const auto& [name, value, note] : constants_table(k)) {
    csv.row({name, num(value), "\"" + note + "\""});
    std::cout << name << " = " << num(value) << '\n';
  }
  return 0;
}

int cmd_psi_grid(const RunOptions& o) {
  Domain domain = load(o);
  const int n = domain.dimension();
  QuadratureConfig quad = quad_of(o);
  require(o.axes.size() == 2, "--axes needs two indices");
  const int ia = o.axes[0], ib = o.axes[1];
  require(ia >= 0 && ia < n && ib >= 0 && ib < n && ia != ib, "--axes must be two distinct indices");
  require(o.range_a.size() == 3 && o.range_b.size() == 3, "ranges are lo,hi,steps");
  const int na = int(o.range_a[2]), nb = int(o.range_b[2]);
  require(na >= 2 && nb >= 2 && na == o.range_a[2] && nb == o.range_b[2],
          "range steps must be integers >= 2");
  Vector base = o.fixed.empty() ? Vector(Vector::Zero(n)) : to_vector(o.fixed);
  require(base.size() == n, "--fixed has the wrong length");

  const fs::path dir = out_dir(o);
  CsvWriter csv(dir / "psi_grid.csv");
  csv.comment("psi over a 2D slice; psi = -1 marks points outside the domain or inside the boundary guard");
  const std::string xa = "x" + std::to_string(ia), xb = "x" + std::to_string(ib);
  csv.row({"i", "j", xa, xb, "psi", "std_error"});
  int interior = 0;
  double vmin = 0, vmax = 0;
  Vector amin, amax;
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      Vector x = base;
      x(ia) = o.range_a[0] + (o.range_a[1] - o.range_a[0]) * i / (na - 1);
      x(ib) = o.range_b[0] + (o.range_b[1] - o.range_b[0]) * j / (nb - 1);
      double v = -1.0, err = 0.0;
      if (contains(domain, x)) {
        try {
          PsiEvaluation e = psi_integrals(domain, x, quad);
          v = e.value;
          err = e.value_error;
        } catch (const PreconditionError&) {
          v = -1.0;  // inside the boundary guard
        }
      }
      if (v > 0.0) {
        if (interior == 0 || v < vmin) {
          vmin = v;
          amin = x;
        }
        if (interior == 0 || v > vmax) {
          vmax = v;
          amax = x;
        }
        ++interior;
      }
      csv.row({std::to_string(i), std::to_string(j), num(x(ia)), num(x(ib)), num(v), num(err)});
    }
  }
  require(interior > 0, "psi-grid: the slice lies entirely outside the domain");
  CsvWriter summary(dir / "psi_grid_summary.csv");
  summary.row({"interior_cells", "psi_min", "argmin_" + xa, "argmin_" + xb, "psi_max",
               "argmax_" + xa, "argmax_" + xb});
  summary.row({std::to_string(interior), num(vmin), num(amin(ia)), num(amin(ib)), num(vmax),
               num(amax(ia)), num(amax(ib))});
  std::cout << "min " << num(vmin) << " at (" << num(amin(ia)) << ", " << num(amin(ib))
            << "), max " << num(vmax) << ", interior cells " << interior << '\n';
  return 0;
}

int cmd_crit(const RunOptions& o) {
  Domain domain = load(o);
  CensusReport r = census(domain, o.crit, quad_of(o));
  write_json(out_dir(o) / "census.json", to_json(r));
  for (const CriticalPoint& p : r.points) {
    std::cout << "index " << p.morse_index << " psi " << num(p.psi_value) << " at";
    for (int i = 0; i < p.location.size(); ++i) std::cout << ' ' << num(p.location(i));
    std::cout << '\n';
  }
  std::cout << r.points.size() << " critical points, bound " << r.cat_lower_bound << ", "
            << (r.satisfied ? "satisfied" : "NOT satisfied") << '\n';
  return r.satisfied ? 0 : 1;
}

int cmd_predict(const RunOptions& o) {
  Domain domain = load(o);
  const int n = domain.dimension();
  QuadratureConfig quad = quad_of(o);
  ModelConstants k = constants(n, o.c2_nodal);
  std::vector<double> params = o.params.empty() ? default_params(o.regime, false) : o.params;
  std::vector<std::pair<std::string, double>> limits;
  std::vector<RatePrediction> rows;
  if (o.regime == "sub") {
    Vector xi = concentration_point(domain, o, quad);
    double psi = psi_integrals(domain, xi, quad).value;
    for (double eps : params) rows.push_back(predict_subcritical(eps, xi, psi, k));
    limits = {{"psi", psi}, {"d", optimal_d(k, psi)}};
  } else if (o.regime == "nodal") {
    NodalLimits lim = nodal_limits(domain, k, o.boundary_samples);
    for (double eps : params) rows.push_back(predict_nodal(lim, eps, n));
    limits = {{"r", lim.r},           {"s_bar", lim.s_bar},
              {"lambda_1", lim.lambda1}, {"lambda_2", lim.lambda2},
              {"d_1", lim.r_bar},     {"d_2", lim.s_bar / lim.r_bar},
              {"t_1", lim.t1_bar},    {"t_2", lim.t2_bar}};
  } else if (o.regime == "hole") {
    double b1 = hole_b1(k, domain, quad);
    HoleCriticalPoint cp = hole_critical_point(k, b1);
    for (double rho : params) rows.push_back(predict_hole(rho, cp.d0, n));
    limits = {{"b1", b1}, {"b2", k.b2_hole}, {"d0", cp.d0}};
  } else {
    throw PreconditionError("--regime must be sub, nodal or hole");
  }
  const fs::path dir = out_dir(o);
  const std::size_t nb = rows.front().xi.size();
  const bool nodal = o.regime == "nodal";
  CsvWriter csv(dir / "predict.csv");
  std::vector<std::string> head{o.regime == "hole" ? "rho" : "epsilon"};
  for (std::size_t b = 1; b <= nb; ++b) {
    head.push_back("delta_" + std::to_string(b));
    if (nodal) head.push_back("tau_" + std::to_string(b));
    for (int i = 0; i < n; ++i) head.push_back("xi_" + std::to_string(b) + "_" + std::to_string(i));
  }
  csv.row(head);
  for (const RatePrediction& r : rows) {
    std::vector<std::string> cells{num(r.parameter)};
    for (std::size_t b = 0; b < nb; ++b) {
      cells.push_back(num(r.delta[b]));
      if (nodal) cells.push_back(num(r.tau[b]));
      for (int i = 0; i < n; ++i) cells.push_back(num(r.xi[b](i)));
    }
    csv.row(cells);
  }
  CsvWriter lim(dir / "predict_limits.csv");
  lim.row({"name", "value"});
  for (const auto& [name, value] : limits) {
    lim.row({name, num(value)});
    std::cout << name << " = " << num(value) << '\n';
  }
  return 0;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(std::abs(v[i]) < std::abs(v[i - 1]))) return false;
  return true;
}

int cmd_energy_check(const RunOptions& o) {
  Domain domain = load(o);
  const int n = domain.dimension();
  QuadratureConfig quad = quad_of(o);
  ModelConstants k = constants(n, o.c2_nodal);
  std::vector<double> params = o.params.empty() ? default_params(o.regime, true) : o.params;
  const fs::path dir = out_dir(o);
  CsvWriter csv(dir / "energy_check.csv");
  std::vector<double> residuals;
  if (o.regime == "sub") {
    Vector xi = concentration_point(domain, o, quad);
    double d = o.d ? *o.d : optimal_d(k, psi_integrals(domain, xi, quad).value);
    auto rows = expansion_residual_sub(domain, d, xi, params, k, quad);
    csv.row({"epsilon_or_rho", "j_eps", "residual", "std_error", "delta", "residual_without_psi",
             "exterior_mass_ratio"});
    for (const SubResidualRow& r : rows) {
      csv.row({num(r.eps), num(r.j_eps), num(r.residual), num(r.std_error), num(r.delta),
               num(r.residual_without_psi), num(r.exterior_mass_ratio)});
      residuals.push_back(r.residual);
    }
  } else if (o.regime == "hole") {
    Vector zeta = o.zeta.empty() ? Vector(Vector::Zero(n)) : to_vector(o.zeta);
    require(zeta.size() == n, "--zeta has the wrong length");
    double d = o.d ? *o.d : hole_critical_point(k, hole_b1(k, domain, quad)).d0;
    auto rows = expansion_residual_hole(domain, d, zeta, params, k, quad);
    csv.row({"epsilon_or_rho", "j_eps", "residual", "std_error", "delta", "hole_mass_ratio"});
    for (const HoleResidualRow& r : rows) {
      csv.row({num(r.rho), num(r.j), num(r.residual), num(r.std_error), num(r.delta),
               num(r.hole_mass_ratio)});
      residuals.push_back(r.residual);
    }
  } else if (o.regime == "nodal") {
    // The nodal expansion carries constants that are not fixed by the model,
    // so this table is exploratory and has no verdict.
    NodalLimits lim = nodal_limits(domain, k, o.boundary_samples);
    csv.comment("exploratory: two-bubble energy against the reduced nodal energy, no verdict");
    csv.row({"epsilon_or_rho", "j_eps", "residual", "std_error", "reduced_energy"});
    for (double eps : params) {
      RatePrediction p = predict_nodal(lim, eps, n);
      Ansatz a{{Bubble{p.delta[0], p.xi[0], 1}, Bubble{p.delta[1], p.xi[1], -1}}};
      EnergyReport e = energy(domain, a, eps, k, quad);
      double reduced = reduced_energy_nodal(k, p.d[0], p.d[1], p.t[0], p.t[1], lim.eta1, lim.eta2,
                                            nodal_eps_power_scale(n, eps));
      double residual = (e.j_eps - 2.0 * k.a) / eps - reduced;
      csv.row({num(eps), num(e.j_eps), num(residual), num(e.std_error / eps), num(reduced)});
      std::cout << "eps " << num(eps) << " j " << num(e.j_eps) << " residual " << num(residual)
                << '\n';
    }
    std::cout << "EXPLORATORY (no verdict)\n";
    return 0;
  } else {
    throw PreconditionError("--regime must be sub, nodal or hole");
  }
  const bool pass = strictly_decreasing(residuals);
  std::ofstream verdict(dir / "energy_check_verdict.txt", std::ios::binary);
  verdict << (pass ? "PASS" : "FAIL") << '\n';
  for (std::size_t i = 0; i < residuals.size(); ++i)
    std::cout << num(params[i]) << " residual " << num(residuals[i]) << '\n';
  std::cout << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? 0 : 1;
}

int cmd_morse_audit(const RunOptions& o) {
  Domain domain = load(o);
  MorseAuditReport r = morse_audit(domain, o.rho, o.trials, o.seed, o.crit, quad_of(o));
  write_json(out_dir(o) / "morse_audit.json", to_json(r));
  for (const AuditTrial& t : r.trials)
    std::cout << "trial points " << t.point_count << " min det ratio " << num(t.min_det_ratio)
              << (t.nondegenerate ? " nondegenerate" : " DEGENERATE")
              << (t.persisted ? "" : " (changed)") << '\n';
  return r.all_nondegenerate ? 0 : 1;
}

// ---------------------------------------------------------------------------

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& c : s)
    if (c == '_') c = '-';
  return "--" + s;
}

std::string manifest_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + manifest_value(v[i]);
    return s;
  }
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) return num(v.get<double>());
  throw PreconditionError("manifest: unsupported value " + v.dump());
}

// Expands a manifest into the equivalent argument list.
std::vector<std::string> manifest_args(const fs::path& path) {
  std::ifstream in(path);
  require(bool(in), "manifest: cannot open " + path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("manifest: ") + e.what());
  }
  require(m.is_object() && m.contains("command"), "manifest: missing \"command\"");
  std::vector<std::string> args{"psiland_cli", m["command"].get<std::string>()};
  const fs::path base = path.parent_path();
  for (const auto& [key, value] : m.items()) {
    if (key == "command") continue;
    if (key == "overrides") {
      require(value.is_object(), "manifest: \"overrides\" must be an object");
      for (const auto& [k, v] : value.items()) {
        args.push_back(flag_name(k));
        args.push_back(manifest_value(v));
      }
      continue;
    }
    std::string flag = key == "domain_file"  ? "--domain"
                       : key == "dimension"  ? "--dim"
                       : key == "output_dir" ? "--out"
                                             : flag_name(key);
    std::string val = manifest_value(value);
    if (key == "domain_file" || key == "output_dir") {
      fs::path p(val);
      if (p.is_relative()) val = (base / p).lexically_normal().string();
    }
    args.push_back(flag);
    args.push_back(val);
  }
  return args;
}

json resolved(const RunOptions& o) {
  json j;
  j["command"] = o.command;
  j["domain_file"] = o.domain_file;
  j["dimension"] = o.dim;
  j["seed"] = o.seed;
  j["regime"] = o.regime;
  json q;
  q["near_budget"] = o.quad.near_budget;
  q["far_shells"] = o.quad.far_shells;
  q["replicates"] = o.quad.replicates;
  q["target_rel_err"] = o.quad.target_rel_err;
  q["h_min_factor"] = o.quad.h_min_factor;
  j["quadrature"] = q;
  json c;
  c["multistart"] = o.crit.multistart;
  c["newton_tol"] = o.crit.newton_tol;
  c["max_iters"] = o.crit.max_iters;
  c["dedupe_radius"] = o.crit.dedupe_radius;
  c["string_nodes"] = o.crit.string_nodes;
  c["morse_tol"] = o.crit.morse_tol;
  j["crit"] = c;
  if (o.c2_nodal) j["c2_nodal"] = *o.c2_nodal;
  j["params"] = o.params;
  j["xi"] = o.xi;
  j["zeta"] = o.zeta;
  if (o.d) j["d"] = *o.d;
  j["rho"] = o.rho;
  j["trials"] = o.trials;
  j["axes"] = o.axes;
  j["range_a"] = o.range_a;
  j["range_b"] = o.range_b;
  j["fixed"] = o.fixed;
  return j;
}

int dispatch(const RunOptions& o) {
  // written first so a failing run still records its inputs
  write_json(out_dir(o) / "run.json", resolved(o));
  if (o.command == "constants") return cmd_constants(o);
  if (o.command == "psi-grid") return cmd_psi_grid(o);
  if (o.command == "crit") return cmd_crit(o);
  if (o.command == "predict") return cmd_predict(o);
  if (o.command == "energy-check") return cmd_energy_check(o);
  if (o.command == "morse-audit") return cmd_morse_audit(o);
  throw PreconditionError("unknown command " + o.command);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  RunOptions o;
  std::string manifest;
  std::optional<double> c2;
  std::optional<double> d;
  std::size_t near_budget = o.quad.near_budget;

  CLI::App app{"Concentration landscape toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--manifest", manifest, "JSON run manifest (replaces all other arguments)");
  app.add_option("--domain", o.domain_file, "domain JSON file");
  app.add_option("--dim", o.dim, "dimension n");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--out", o.out_dir, "output directory");
  app.add_option("--near-budget", near_budget, "rays over all replicates");
  app.add_option("--far-shells", o.quad.far_shells, "maximum dyadic tail shells");
  app.add_option("--replicates", o.quad.replicates, "randomized QMC replicates");
  app.add_option("--target-rel-err", o.quad.target_rel_err, "maximum relative replicate spread");
  app.add_option("--h-min-factor", o.quad.h_min_factor, "boundary guard factor");
  app.add_option("--workers", o.quad.workers, "worker threads, 0 for all cores");
  app.add_option("--multistart", o.crit.multistart, "random Newton seeds");
  app.add_option("--newton-tol", o.crit.newton_tol, "gradient-norm stop");
  app.add_option("--max-iters", o.crit.max_iters, "iteration cap");
  app.add_option("--dedupe-radius", o.crit.dedupe_radius, "critical point merge radius");
  app.add_option("--string-nodes", o.crit.string_nodes, "nodes on the mountain-pass path");
  app.add_option("--morse-tol", o.crit.morse_tol, "nondegeneracy threshold");
  app.add_option("--c2-nodal", c2, "override for the nodal log coefficient");

  auto* grid = app.add_subcommand("psi-grid", "psi over a 2D slice");
  grid->add_option("--axes", o.axes, "two axis indices")->delimiter(',')->expected(2);
  grid->add_option("--a-range", o.range_a, "lo,hi,steps on the first axis")->delimiter(',');
  grid->add_option("--b-range", o.range_b, "lo,hi,steps on the second axis")->delimiter(',');
  grid->add_option("--fixed", o.fixed, "values of the remaining coordinates")->delimiter(',');

  app.add_subcommand("crit", "critical point census");

  auto* predict = app.add_subcommand("predict", "blow-up rate table");
  auto* check = app.add_subcommand("energy-check", "reduced energy expansion residuals");
  for (CLI::App* sub : {predict, check}) {
    sub->add_option("--regime", o.regime, "sub, nodal or hole")
        ->check(CLI::IsMember({"sub", "nodal", "hole"}));
    sub->add_option("--params", o.params, "epsilon or rho values")->delimiter(',');
    sub->add_option("--xi", o.xi, "concentration point (sub)")->delimiter(',');
    sub->add_option("--boundary-samples", o.boundary_samples, "diameter search samples (nodal)");
  }
  check->add_option("--zeta", o.zeta, "hole offset zeta")->delimiter(',');
  check->add_option("--d", d, "concentration parameter d");

  auto* audit = app.add_subcommand("morse-audit", "nondegeneracy under random perturbations");
  audit->add_option("--rho", o.rho, "C^2 size of the perturbation");
  audit->add_option("--trials", o.trials, "number of perturbations");

  app.add_subcommand("constants", "model constants with provenance");

  std::vector<std::string> argv = args;
  try {
    // a manifest replaces the command line
    for (std::size_t i = 1; i + 1 < argv.size(); ++i) {
      if (argv[i] == "--manifest") {
        require(argv.size() == 3, "--manifest cannot be combined with other arguments");
        argv = manifest_args(argv[i + 1]);
        break;
      }
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  o.command = app.get_subcommands().front()->get_name();
  o.quad.near_budget = near_budget;
  o.c2_nodal = c2;
  o.d = d;
  try {
    o.crit.validate();
    return dispatch(o);
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace psiland
