// SPDX-License-Identifier: Apache-2.0
#include "enlarge/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "enlarge/drift_engine.hpp"
#include "enlarge/error.hpp"

namespace enlarge::cli {

namespace {

using Json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, long line, const std::string& what) {
  throw ConfigError("invalid value '" + value + "' for " + key + ": expected " + what, key, line);
}

double to_double(const std::string& key, const std::string& value, long line) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, value, line, "a number");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& value, long line) {
  const std::string v = trim(value);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) {
    bad_value(key, value, line, "a non-negative integer");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& value, long line) {
  return static_cast<std::size_t>(to_uint(key, value, line));
}

bool to_bool(const std::string& key, const std::string& value, long line) {
  const std::string v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, value, line, "true or false");
}

std::vector<double> to_list(const std::string& key, const std::string& value, long line) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item, line));
  if (out.empty()) bad_value(key, value, line, "a comma-separated list of numbers");
  return out;
}

template <class F>
auto parse_enum(const std::string& key, const std::string& value, long line, F&& parse, const char* what) {
  try {
    return parse(trim(value));
  } catch (const InvalidArgument&) {
    bad_value(key, value, line, what);
  }
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&, long)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.seed", [](RunConfig& c, const auto& k, const auto& v, long l) { c.seed = to_uint(k, v, l); }},
      {"run.out", [](RunConfig& c, const auto&, const auto& v, long) { c.out_dir = trim(v); }},
      {"run.exec", [](RunConfig& c, const auto& k, const auto& v, long l) {
         c.exec = parse_enum(k, v, l, [](const std::string& s) { return parse_exec(s); }, "serial|openmp");
       }},
      {"model.mu", [](RunConfig& c, const auto& k, const auto& v, long l) { c.model.mu = to_list(k, v, l); }},
      {"model.sigma", [](RunConfig& c, const auto& k, const auto& v, long l) { c.model.sigma = to_list(k, v, l); }},
      {"model.rho", [](RunConfig& c, const auto& k, const auto& v, long l) { c.model.rho = to_list(k, v, l); }},
      {"model.t_max", [](RunConfig& c, const auto& k, const auto& v, long l) { c.model.t_max = to_double(k, v, l); }},
      {"model.m", [](RunConfig& c, const auto& k, const auto& v, long l) {
         const std::string s = trim(v);
         if (s == "brownian") c.model.m = model::MSelector::brownian;
         else if (s == "tanh") c.model.m = model::MSelector::tanh;
         else bad_value(k, v, l, "brownian|tanh");
       }},
      {"grid.steps", [](RunConfig& c, const auto& k, const auto& v, long l) { c.steps = to_size(k, v, l); }},
      {"quadrature.backend", [](RunConfig& c, const auto& k, const auto& v, long l) {
         const std::string s = trim(v);
         if (s == "automatic") c.quad.backend = marginal::Backend::automatic;
         else if (s == "quadrature") c.quad.backend = marginal::Backend::quadrature;
         else if (s == "monte_carlo") c.quad.backend = marginal::Backend::monte_carlo;
         else bad_value(k, v, l, "automatic|quadrature|monte_carlo");
       }},
      {"quadrature.abs_tol", [](RunConfig& c, const auto& k, const auto& v, long l) { c.quad.abs_tol = to_double(k, v, l); }},
      {"quadrature.rel_tol", [](RunConfig& c, const auto& k, const auto& v, long l) { c.quad.rel_tol = to_double(k, v, l); }},
      {"quadrature.max_depth", [](RunConfig& c, const auto& k, const auto& v, long l) {
         c.quad.max_depth = static_cast<unsigned>(to_uint(k, v, l));
       }},
      {"quadrature.max_nested", [](RunConfig& c, const auto& k, const auto& v, long l) { c.quad.max_nested = to_size(k, v, l); }},
      {"quadrature.mc_samples", [](RunConfig& c, const auto& k, const auto& v, long l) { c.quad.mc_samples = to_size(k, v, l); }},
      {"drift.k", [](RunConfig& c, const auto& k, const auto& v, long l) { c.drift.k = to_size(k, v, l); }},
      {"drift.scenarios", [](RunConfig& c, const auto& k, const auto& v, long l) { c.drift.scenarios = to_size(k, v, l); }},
      {"drift.tabulated", [](RunConfig& c, const auto& k, const auto& v, long l) { c.drift.tabulated = to_bool(k, v, l); }},
      {"drift.denominator_floor", [](RunConfig& c, const auto& k, const auto& v, long l) {
         c.drift.denominator_floor = to_double(k, v, l);
       }},
      {"reduce.mu", [](RunConfig& c, const auto& k, const auto& v, long l) { c.reduce.mu = to_double(k, v, l); }},
      {"reduce.sigma", [](RunConfig& c, const auto& k, const auto& v, long l) { c.reduce.sigma = to_double(k, v, l); }},
      {"reduce.rho", [](RunConfig& c, const auto& k, const auto& v, long l) { c.reduce.rho = to_double(k, v, l); }},
      {"reduce.scenarios", [](RunConfig& c, const auto& k, const auto& v, long l) { c.reduce.scenarios = to_size(k, v, l); }},
      {"reduce.tol", [](RunConfig& c, const auto& k, const auto& v, long l) { c.reduce.tol = to_double(k, v, l); }},
      {"mctest.n_paths", [](RunConfig& c, const auto& k, const auto& v, long l) { c.mctest.n_paths = to_size(k, v, l); }},
      {"mctest.windows", [](RunConfig& c, const auto& k, const auto& v, long l) { c.mctest.windows = to_size(k, v, l); }},
      {"mctest.w_bins", [](RunConfig& c, const auto& k, const auto& v, long l) { c.mctest.w_bins = to_size(k, v, l); }},
      {"mctest.time_bins", [](RunConfig& c, const auto& k, const auto& v, long l) { c.mctest.time_bins = to_size(k, v, l); }},
      {"mctest.min_bin", [](RunConfig& c, const auto& k, const auto& v, long l) { c.mctest.min_bin = to_size(k, v, l); }},
      {"mctest.alpha", [](RunConfig& c, const auto& k, const auto& v, long l) { c.mctest.alpha = to_double(k, v, l); }},
      {"mctest.producer", [](RunConfig& c, const auto& k, const auto& v, long l) {
         c.mctest.producer = parse_enum(k, v, l, mc::parse_producer, "sorted|zero|weight_swapped|tau_rho");
       }},
      {"oracle.seeds", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.seeds = to_size(k, v, l); }},
      {"oracle.depth_lo", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.depth_lo = to_size(k, v, l); }},
      {"oracle.depth_hi", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.depth_hi = to_size(k, v, l); }},
      {"oracle.n_lo", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.n_lo = to_size(k, v, l); }},
      {"oracle.n_hi", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.n_hi = to_size(k, v, l); }},
      {"oracle.k", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.k = to_size(k, v, l); }},
      {"oracle.tol", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.tol = to_double(k, v, l); }},
      {"oracle.cond_tol", [](RunConfig& c, const auto& k, const auto& v, long l) { c.oracle.cond_tol = to_double(k, v, l); }},
      {"checkaAA.n_paths", [](RunConfig& c, const auto& k, const auto& v, long l) { c.aaa.n_paths = to_size(k, v, l); }},
  };
  return table;
}

/// Line of `key` inside `[section]`, 0 if not found.
long find_line(const std::string& path, const std::string& section, const std::string& key) {
  std::ifstream in(path);
  std::string line, current;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (current == section && eq != std::string::npos && trim(t.substr(0, eq)) == key) return no;
  }
  return 0;
}

// -- output ------------------------------------------------------------------

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Console formatting; files always use num().
std::string brief(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
  const auto path = std::filesystem::path(cfg.out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string(), "run.out");
  return out;
}

void write_json(const RunConfig& cfg, const std::string& name, const Json& j) {
  auto out = open_out(cfg, name);
  out << j.dump(2) << '\n';
}

Json meta(const RunConfig& cfg) {
  Json j;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = *cfg.seed;
  j["steps"] = cfg.steps;
  j["t_max"] = cfg.model.t_max;
  const bool bounded = cfg.model.m == model::MSelector::tanh;
  j["base_martingale"] = bounded ? "tanh" : "brownian";
  // The drift formula is proved for bounded M; for M = W it is only checked by simulation.
  j["bounded_m"] = bounded;
  if (!bounded) j["warning"] = "M = W is unbounded; the drift formula is applied outside its proven scope";
  return j;
}

void warn_aaa_not_checked(const RunConfig& cfg) {
  std::cerr << "warning: the integrability condition on u^M / a was not checked for this model; run `checkaAA` "
               "with the same [model] section\n";
  if (cfg.model.m == model::MSelector::brownian) {
    std::cerr << "warning: M = W is unbounded; the drift formula is applied outside its proven scope\n";
  }
}

std::string rho_name(const comb::Injection& rho) {
  std::string s;
  for (std::size_t i = 0; i < rho.size(); ++i) s += (i ? "-" : "") + std::to_string(rho[i]);
  return s;
}

void write_drift_csv(std::ostream& out, const drift::DriftPath& p) {
  out << "# schema: enlarge.drift v1\n";
  out << "v,regime";
  for (const auto& r : p.injections) out << ",ratio_" << rho_name(r);
  for (const auto& r : p.injections) out << ",weight_" << rho_name(r);
  out << ",increment,cumulative,error,flagged\n";
  for (const auto& s : p.steps) {
    out << num(s.v) << ',' << s.regime;
    for (std::size_t r = 0; r < p.injections.size(); ++r) out << ',' << (r < s.ratio.size() ? num(s.ratio[r]) : "");
    for (std::size_t r = 0; r < p.injections.size(); ++r) out << ',' << (r < s.weight.size() ? num(s.weight[r]) : "");
    out << ',' << num(s.increment) << ',' << num(s.cumulative) << ',' << num(s.error) << ',' << (s.flagged ? 1 : 0)
        << '\n';
  }
}

drift::DriftConfig drift_config(const RunConfig& cfg) {
  drift::DriftConfig d;
  d.quad = cfg.quad;
  d.denominator_floor = cfg.drift.denominator_floor;
  return d;
}

// -- modes -------------------------------------------------------------------

int run_oracle(const RunConfig& cfg) {
  const auto& o = cfg.oracle;
  const auto specs = oracle::suite_specs({o.seeds, o.depth_lo, o.depth_hi, o.n_lo, o.n_hi, o.k, *cfg.seed});
  const auto results = oracle::run_oracle_suite(specs, cfg.exec);
  auto csv = open_out(cfg, "oracle.csv");
  csv << "# schema: enlarge.oracle v1\n";
  csv << "instance,seed,depth,hidden,n,k,atoms,gde_dev,gdel_dev,fhat_dev,decompminmax_dev,cond_dev,hyp_g,psi_ok,"
         "t3_ok,pass\n";
  std::size_t failures = 0;
  double worst_drift = 0.0, worst_cond = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const double drift_dev = std::max({r.gde_dev, r.gdel_dev, r.fhat_dev, r.decompminmax_dev});
    const bool ok = drift_dev <= o.tol && r.cond_dev <= o.cond_tol && r.hyp_g && r.psi_ok && r.t3_ok;
    failures += ok ? 0 : 1;
    worst_drift = std::max(worst_drift, drift_dev);
    worst_cond = std::max(worst_cond, r.cond_dev);
    csv << i << ',' << r.spec.seed << ',' << r.spec.depth << ',' << r.spec.hidden << ',' << r.spec.n << ','
        << r.spec.k << ',' << r.atoms << ',' << num(r.gde_dev) << ',' << num(r.gdel_dev) << ',' << num(r.fhat_dev)
        << ',' << num(r.decompminmax_dev) << ',' << num(r.cond_dev) << ',' << r.hyp_g << ',' << r.psi_ok << ','
        << r.t3_ok << ',' << ok << '\n';
  }
  Json j = meta(cfg);
  j["instances"] = results.size();
  j["failures"] = failures;
  j["max_drift_dev"] = worst_drift;
  j["max_cond_dev"] = worst_cond;
  j["tol"] = o.tol;
  j["cond_tol"] = o.cond_tol;
  j["pass"] = failures == 0;
  write_json(cfg, "oracle_report.json", j);
  std::cout << "oracle: " << results.size() - failures << "/" << results.size() << " instances pass, max drift dev "
            << brief(worst_drift) << ", max cond dev " << brief(worst_cond) << '\n';
  return failures == 0 ? kPass : kCheckFailed;
}

int run_drift(const RunConfig& cfg) {
  const model::LognormalFactorModel m(cfg.model);
  warn_aaa_not_checked(cfg);
  const auto dcfg = drift_config(cfg);
  std::vector<double> grid;
  std::optional<drift::SortedDriftTables> tables;
  Json scen = Json::array();
  for (std::size_t i = 0; i < cfg.drift.scenarios; ++i) {
    auto rng = model::path_rng(*cfg.seed, i);
    const auto sc = m.simulate(cfg.steps, cfg.drift.k, rng);
    if (cfg.drift.tabulated && !tables) tables.emplace(m, sc.grid, cfg.drift.k, dcfg);
    const auto path = tables ? tables->evaluate(sc) : drift::drift_sorted(m, sc, cfg.drift.k, dcfg);
    const std::string name = "drift_" + std::to_string(i) + ".csv";
    auto out = open_out(cfg, name);
    write_drift_csv(out, path);
    Json s;
    s["file"] = name;
    s["tau"] = sc.tau;
    s["w1"] = sc.w1;
    s["flagged"] = path.flagged;
    s["max_error"] = path.max_error;
    s["total_drift"] = path.steps.empty() ? 0.0 : path.steps.back().cumulative;
    scen.push_back(s);
  }
  Json j = meta(cfg);
  j["k"] = cfg.drift.k;
  j["tabulated"] = cfg.drift.tabulated;
  j["scenarios"] = scen;
  write_json(cfg, "drift_summary.json", j);
  std::cout << "drift: wrote " << cfg.drift.scenarios << " scenario(s) to " << cfg.out_dir << '\n';
  return kPass;
}

int run_mctest(const RunConfig& cfg) {
  const model::LognormalFactorModel m(cfg.model);
  warn_aaa_not_checked(cfg);
  const auto& s = cfg.mctest;
  if (s.windows == 0 || s.windows > cfg.steps) throw ConfigError("mctest.windows must be in 1..grid.steps", "mctest.windows");
  mc::MartingaleTestConfig t;
  t.n_paths = s.n_paths;
  t.steps = cfg.steps;
  t.checkpoints.clear();
  for (std::size_t w = 0; w < s.windows; ++w) t.checkpoints.push_back({w * cfg.steps / s.windows, (w + 1) * cfg.steps / s.windows});
  t.w_bins = s.w_bins;
  t.time_bins = s.time_bins;
  t.min_bin = s.min_bin;
  t.alpha = s.alpha;
  t.seed = *cfg.seed;
  t.exec = cfg.exec;
  const auto rep = mc::martingale_test(m, cfg.drift.k, s.producer, t);
  auto csv = open_out(cfg, "mctest_bins.csv");
  csv << "# schema: enlarge.mctest v1\n";
  csv << "checkpoint,s,t,label,count,mean,stderr,z\n";
  for (const auto& b : rep.bins) {
    const auto& c = t.checkpoints[b.checkpoint];
    csv << b.checkpoint << ',' << num(m.params().t_max * static_cast<double>(c.s) / static_cast<double>(cfg.steps))
        << ',' << num(m.params().t_max * static_cast<double>(c.t) / static_cast<double>(cfg.steps)) << ',' << b.label
        << ',' << b.count << ',' << num(b.mean) << ',' << num(b.stderr_) << ',' << num(b.z) << '\n';
  }
  Json j = meta(cfg);
  j["name"] = rep.name;
  j["producer"] = mc::to_string(s.producer);
  j["k"] = cfg.drift.k;
  j["n_paths"] = rep.n_paths;
  j["alpha"] = rep.alpha;
  j["bins"] = rep.bins.size();
  j["max_abs_z"] = rep.max_abs_z;
  j["z_critical"] = rep.z_critical;
  j["pass"] = rep.pass;
  write_json(cfg, "mctest_report.json", j);
  std::cout << "mctest " << mc::to_string(s.producer) << ": max |z| " << brief(rep.max_abs_z) << " vs "
            << brief(rep.z_critical) << " over " << rep.bins.size() << " bins: " << (rep.pass ? "pass" : "fail")
            << '\n';
  return rep.pass ? kPass : kCheckFailed;
}

int run_reduce(const RunConfig& cfg) {
  const auto& r = cfg.reduce;
  const model::ModelParams p{{r.mu}, {r.sigma}, {r.rho}, cfg.model.t_max, cfg.model.m};
  const model::LognormalFactorModel m(p);
  const auto dcfg = drift_config(cfg);
  auto csv = open_out(cfg, "reduce.csv");
  csv << "# schema: enlarge.reduce v1\n";
  csv << "scenario,v,regime,sorted_increment,classical_increment,abs_diff\n";
  double max_inc = 0.0, max_cum = 0.0;
  for (std::size_t i = 0; i < r.scenarios; ++i) {
    auto rng = model::path_rng(*cfg.seed, i);
    const auto sc = m.simulate(cfg.steps, 1, rng);
    const auto d = drift::drift_sorted(m, sc, 1, dcfg);
    const auto c = drift::classical_single_time_drift(p, sc);
    for (std::size_t s = 0; s < d.steps.size(); ++s) {
      const double diff = std::abs(d.steps[s].increment - c.steps[s].increment);
      max_inc = std::max(max_inc, diff);
      max_cum = std::max(max_cum, std::abs(d.steps[s].cumulative - c.steps[s].cumulative));
      csv << i << ',' << num(d.steps[s].v) << ',' << d.steps[s].regime << ',' << num(d.steps[s].increment) << ','
          << num(c.steps[s].increment) << ',' << num(diff) << '\n';
    }
  }
  const bool pass = max_inc <= r.tol && max_cum <= r.tol;
  Json j = meta(cfg);
  j["scenarios"] = r.scenarios;
  j["max_abs_increment_dev"] = max_inc;
  j["max_abs_cumulative_dev"] = max_cum;
  j["tol"] = r.tol;
  j["pass"] = pass;
  write_json(cfg, "reduce_report.json", j);
  std::cout << "reduce: max deviation " << brief(std::max(max_inc, max_cum)) << " (tol " << brief(r.tol) << "): "
            << (pass ? "pass" : "fail") << '\n';
  return pass ? kPass : kCheckFailed;
}

int run_aaa(const RunConfig& cfg) {
  const model::LognormalFactorModel m(cfg.model);
  const auto rep = model::check_aAA(m, cfg.aaa.n_paths, cfg.steps, *cfg.seed, cfg.exec);
  Json j = meta(cfg);
  j["estimate"] = rep.estimate;
  j["stderr"] = rep.stderr_;
  j["paths"] = rep.paths;
  j["finite"] = rep.finite;
  j["pass"] = rep.finite;
  write_json(cfg, "checkaAA.json", j);
  std::cout << "checkaAA: estimate " << brief(rep.estimate) << " +- " << brief(rep.stderr_) << ": "
            << (rep.finite ? "finite" : "not resolved") << '\n';
  return rep.finite ? kPass : kCheckFailed;
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "oracle") return Mode::oracle;
  if (s == "drift") return Mode::drift;
  if (s == "mctest") return Mode::mctest;
  if (s == "reduce") return Mode::reduce;
  if (s == "checkaAA") return Mode::checkaAA;
  throw InvalidArgument("unknown mode '" + s + "'");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::oracle: return "oracle";
    case Mode::drift: return "drift";
    case Mode::mctest: return "mctest";
    case Mode::reduce: return "reduce";
    case Mode::checkaAA: return "checkaAA";
  }
  return "?";
}

void apply_setting(RunConfig& cfg, const std::string& dotted_key, const std::string& value, long line) {
  const auto it = setters().find(trim(dotted_key));
  if (it == setters().end()) throw ConfigError("unknown key " + dotted_key, dotted_key, line);
  it->second(cfg, it->first, value, line);
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.message(), {}, static_cast<long>(e.line()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("key outside a section: " + section, section, find_line(path, "", section));
    }
    for (const auto& [key, node] : body) {
      if (!node.empty()) throw ConfigError("nested keys are not supported", section + "." + key);
      apply_setting(cfg, section + "." + key, node.data(), find_line(path, section, key));
    }
  }
}

int run(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError("a seed is required (--seed or run.seed)", "run.seed");
  cfg.model.validate();
  if (cfg.steps == 0) throw ConfigError("grid.steps must be positive", "grid.steps");
  std::filesystem::create_directories(cfg.out_dir);
  switch (cfg.mode) {
    case Mode::oracle: return run_oracle(cfg);
    case Mode::drift: return run_drift(cfg);
    case Mode::mctest: return run_mctest(cfg);
    case Mode::reduce: return run_reduce(cfg);
    case Mode::checkaAA: return run_aaa(cfg);
  }
  return kUsage;
}

int main(int argc, char** argv) {
  CLI::App app{"Drift computations and checks for enlarged filtrations"};
  std::string mode, config_path, out_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> depth, n, k, seeds;
  std::optional<std::string> exec;
  app.add_option("mode", mode, "oracle | drift | mctest | reduce | checkaAA")
      ->required()
      ->check(CLI::IsMember({"oracle", "drift", "mctest", "reduce", "checkaAA"}));
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override, section.key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed (required unless run.seed is configured)");
  app.add_option("--depth", depth, "oracle: fixed tree depth");
  app.add_option("--n", n, "oracle: fixed number of times");
  app.add_option("--k", k, "oracle and drift: number of sorted times");
  app.add_option("--seeds", seeds, "oracle: number of random instances");
  app.add_option("--exec", exec, "serial | openmp")->check(CLI::IsMember({"serial", "openmp"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }
  try {
    RunConfig cfg;
    cfg.mode = parse_mode(mode);
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'", s);
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (depth) cfg.oracle.depth_lo = cfg.oracle.depth_hi = *depth;
    if (n) cfg.oracle.n_lo = cfg.oracle.n_hi = *n;
    if (k) cfg.oracle.k = cfg.drift.k = *k;
    if (seeds) cfg.oracle.seeds = *seeds;
    if (exec) cfg.exec = parse_exec(*exec);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    if (e.line() > 0) std::cerr << " at line " << e.line();
    std::cerr << ": " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const QuadratureError& e) {
    std::cerr << "numeric failure: " << e.what() << " (estimate " << num(e.estimate()) << ", error bound "
              << num(e.error_bound()) << ")\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  }
}

}  // namespace enlarge::cli
