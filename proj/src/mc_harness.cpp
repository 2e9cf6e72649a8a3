// SPDX-License-Identifier: Apache-2.0
#include "enlarge/mc_harness.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <tuple>

#include "enlarge/drift_engine.hpp"
#include "enlarge/error.hpp"

namespace enlarge::mc {

namespace {

struct PathRecord {
  double w_s = 0.0;
  std::size_t regime = 0;
  double last_time = 0.0;  ///< last occurred (sorted) time before s, if any
  double diff = 0.0;       ///< X_t - X_s
};

using BinKey = std::tuple<std::size_t, std::size_t, std::size_t>;  // (w bin, regime, time bin)

/// Index of x among quantile cut points of `values` (n_bins groups of equal size).
std::vector<double> quantile_cuts(std::vector<double> values, std::size_t n_bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> cuts;
  for (std::size_t b = 1; b < n_bins && !values.empty(); ++b) {
    cuts.push_back(values[b * values.size() / n_bins]);
  }
  return cuts;
}

std::size_t bin_of(const std::vector<double>& cuts, double x) {
  return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

std::string key_label(const BinKey& k) {
  return "w" + std::to_string(std::get<0>(k)) + "/j" + std::to_string(std::get<1>(k)) + "/t" +
         std::to_string(std::get<2>(k));
}

BinResult summarize(std::size_t checkpoint, std::string label, const std::vector<double>& xs) {
  BinResult b;
  b.checkpoint = checkpoint;
  b.label = std::move(label);
  b.count = xs.size();
  double sum = 0.0;
  for (double x : xs) sum += x;
  b.mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - b.mean) * (x - b.mean);
  const double var = xs.size() > 1 ? sq / static_cast<double>(xs.size() - 1) : 0.0;
  b.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
  if (b.stderr_ > 0.0) {
    b.z = b.mean / b.stderr_;
  } else {
    b.z = b.mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return b;
}

/// Groups records by key, merges undersized bins in key order and summarizes.
std::vector<BinResult> binned(std::size_t checkpoint, const std::map<BinKey, std::vector<double>>& groups,
                              std::size_t min_bin) {
  std::vector<BinResult> out;
  std::vector<double> acc;
  std::optional<BinKey> first;
  BinKey last{};
  std::vector<std::pair<std::string, std::vector<double>>> closed;
  for (const auto& [key, xs] : groups) {
    if (!first) first = key;
    last = key;
    acc.insert(acc.end(), xs.begin(), xs.end());
    if (acc.size() >= min_bin) {
      const std::string label = *first == last ? key_label(last) : key_label(*first) + ".." + key_label(last);
      closed.emplace_back(label, std::move(acc));
      acc.clear();
      first.reset();
    }
  }
  if (!acc.empty()) {
    if (closed.empty()) {
      throw InvalidArgument("martingale_test: fewer than min_bin paths at checkpoint " + std::to_string(checkpoint));
    }
    auto& tail = closed.back();
    tail.first += ".." + key_label(last);
    tail.second.insert(tail.second.end(), acc.begin(), acc.end());
  }
  for (auto& [label, xs] : closed) out.push_back(summarize(checkpoint, label, xs));
  return out;
}

void finish(TestReport& rep, double alpha, std::optional<double> z_threshold = std::nullopt) {
  rep.alpha = alpha;
  rep.z_critical = z_threshold ? *z_threshold : sidak_critical(alpha, rep.bins.size());
  rep.max_abs_z = 0.0;
  for (const auto& b : rep.bins) rep.max_abs_z = std::max(rep.max_abs_z, std::abs(b.z));
  rep.pass = rep.max_abs_z <= rep.z_critical;
}

}  // namespace

double sidak_critical(double alpha, std::size_t tests) {
  if (!(alpha > 0.0 && alpha < 1.0) || tests == 0) throw InvalidArgument("sidak_critical: bad arguments");
  const double per_test = 1.0 - std::pow(1.0 - alpha, 1.0 / static_cast<double>(tests));
  return boost::math::quantile(boost::math::complement(boost::math::normal(), per_test / 2.0));
}

DriftProducer parse_producer(const std::string& s) {
  if (s == "sorted") return DriftProducer::sorted;
  if (s == "zero") return DriftProducer::zero;
  if (s == "weight_swapped") return DriftProducer::weight_swapped;
  if (s == "tau_rho") return DriftProducer::tau_rho;
  throw InvalidArgument("unknown drift producer '" + s + "' (sorted|zero|weight_swapped|tau_rho)");
}

std::string to_string(DriftProducer p) {
  switch (p) {
    case DriftProducer::sorted: return "sorted";
    case DriftProducer::zero: return "zero";
    case DriftProducer::weight_swapped: return "weight_swapped";
    case DriftProducer::tau_rho: return "tau_rho";
  }
  return "?";
}

TestReport martingale_test(const model::LognormalFactorModel& m, std::size_t k, DriftProducer producer,
                           const MartingaleTestConfig& cfg) {
  if (k == 0 || k > m.n()) throw InvalidArgument("martingale_test: need 1 <= k <= n");
  if (cfg.n_paths == 0 || cfg.steps == 0) throw InvalidArgument("martingale_test: need paths and steps");
  for (const auto& c : cfg.checkpoints) {
    if (!(c.s < c.t && c.t <= cfg.steps)) throw InvalidArgument("martingale_test: checkpoint outside the grid");
  }
  std::vector<double> grid(cfg.steps + 1);
  for (std::size_t j = 0; j <= cfg.steps; ++j) {
    grid[j] = m.params().t_max * static_cast<double>(j) / static_cast<double>(cfg.steps);
  }
  std::optional<drift::SortedDriftTables> tables;
  if (producer == DriftProducer::sorted || producer == DriftProducer::weight_swapped) {
    tables.emplace(m, grid, k);
    tables->build_all();
  }
  comb::Injection rho(k);
  for (std::size_t i = 0; i < k; ++i) rho[i] = i;

  const std::size_t nc = cfg.checkpoints.size();
  std::vector<PathRecord> rec(cfg.n_paths * nc);
  parallel_for(cfg.exec, cfg.n_paths, [&](std::size_t p) {
    auto rng = model::path_rng(cfg.seed, p);
    const auto sc = m.simulate(cfg.steps, k, rng);
    std::vector<double> cum(cfg.steps + 1, 0.0);
    if (producer != DriftProducer::zero) {
      const drift::DriftPath d = producer == DriftProducer::tau_rho
                                     ? drift::drift_tau_rho(m, sc, rho, std::nullopt)
                                     : tables->evaluate(sc, false, producer == DriftProducer::weight_swapped);
      for (std::size_t j = 0; j < d.steps.size(); ++j) cum[j + 1] = d.steps[j].cumulative;
    }
    // Times visible in the tested filtration: sorted times, or the rho-times.
    std::vector<double> seen;
    if (producer == DriftProducer::tau_rho) {
      for (std::size_t c : rho) seen.push_back(sc.tau[c]);
      std::sort(seen.begin(), seen.end());
    } else {
      seen.assign(sc.sorted.begin(), sc.sorted.begin() + static_cast<std::ptrdiff_t>(k));
    }
    for (std::size_t c = 0; c < nc; ++c) {
      const auto [s, t] = cfg.checkpoints[c];
      PathRecord& r = rec[p * nc + c];
      r.w_s = sc.w[s];
      r.regime = drift::regime(seen, k, grid[s]);
      r.last_time = r.regime > 0 ? seen[r.regime - 1] : 0.0;
      const double xs = m.m_value(grid[s], sc.w[s]) - cum[s];
      const double xt = m.m_value(grid[t], sc.w[t]) - cum[t];
      r.diff = xt - xs;
    }
  });

  TestReport rep;
  rep.name = "martingale_test/" + to_string(producer);
  rep.seed = cfg.seed;
  rep.n_paths = cfg.n_paths;
  rep.steps = cfg.steps;
  rep.t_max = m.params().t_max;
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<double> ws(cfg.n_paths);
    for (std::size_t p = 0; p < cfg.n_paths; ++p) ws[p] = rec[p * nc + c].w_s;
    const auto wcuts = quantile_cuts(ws, cfg.w_bins);
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> times;
    std::vector<std::size_t> wb(cfg.n_paths);
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
      const auto& r = rec[p * nc + c];
      wb[p] = bin_of(wcuts, r.w_s);
      if (r.regime > 0) times[{wb[p], r.regime}].push_back(r.last_time);
    }
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> tcuts;
    for (auto& [key, ts] : times) tcuts[key] = quantile_cuts(ts, cfg.time_bins);
    std::map<BinKey, std::vector<double>> groups;
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
      const auto& r = rec[p * nc + c];
      const std::size_t tb = r.regime > 0 ? bin_of(tcuts[{wb[p], r.regime}], r.last_time) : 0;
      groups[{wb[p], r.regime, tb}].push_back(r.diff);
    }
    auto bins = binned(c, groups, cfg.min_bin);
    rep.bins.insert(rep.bins.end(), bins.begin(), bins.end());
  }
  finish(rep, cfg.alpha);
  return rep;
}

namespace {

double variant_density(const model::LognormalFactorModel& m, DensityVariant v, double t, double w,
                       std::span<const double> x) {
  switch (v) {
    case DensityVariant::exact: return m.density(t, w, x).a;
    case DensityVariant::product_form: return m.density_product_form(t, w, x).a;
    case DensityVariant::constant_variance: {
      double log_a = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double s2 = m.params().sigma[i] * m.params().sigma[i];
        const double r = std::log(x[i]) - m.marginal_mean(i, w);
        log_a += -0.5 * std::log(2.0 * std::numbers::pi * s2) - 0.5 * r * r / s2 - std::log(x[i]);
      }
      return std::exp(log_a);
    }
  }
  return 0.0;
}

}  // namespace

TestReport density_martingale_test(const model::LognormalFactorModel& m, DensityVariant variant,
                                   const DensityTestConfig& cfg) {
  for (const auto& [s, t] : cfg.times) {
    if (!(0.0 <= s && s < t && t <= m.params().t_max)) throw InvalidArgument("density_martingale_test: bad times");
  }
  // Evaluation points drawn from the unconditional law so the densities are not
  // negligible; their streams follow the path streams.
  std::vector<std::vector<double>> points;
  for (std::size_t i = 0; i < cfg.n_points; ++i) {
    auto rng = model::path_rng(cfg.seed, cfg.n_paths + i);
    points.push_back(m.simulate(1, 1, rng).tau);
  }
  // One stream per path; each (s, t) pair gets its own independent draws.
  const std::size_t np = cfg.times.size();
  std::vector<double> ws(cfg.n_paths * np), wt(cfg.n_paths * np);
  parallel_for(cfg.exec, cfg.n_paths, [&](std::size_t p) {
    auto rng = model::path_rng(cfg.seed, p);
    std::normal_distribution<double> nd;
    for (std::size_t c = 0; c < np; ++c) {
      const auto [s, t] = cfg.times[c];
      ws[p * np + c] = std::sqrt(s) * nd(rng);
      wt[p * np + c] = ws[p * np + c] + std::sqrt(t - s) * nd(rng);
    }
  });
  TestReport rep;
  rep.name = "density_martingale_test";
  rep.seed = cfg.seed;
  rep.n_paths = cfg.n_paths;
  rep.t_max = m.params().t_max;
  std::vector<double> w_s(cfg.n_paths), diff(cfg.n_paths);
  for (std::size_t c = 0; c < np; ++c) {
    const auto [s, t] = cfg.times[c];
    for (std::size_t p = 0; p < cfg.n_paths; ++p) w_s[p] = ws[p * np + c];
    const auto cuts = quantile_cuts(w_s, s > 0.0 ? cfg.w_bins : 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
      parallel_for(cfg.exec, cfg.n_paths, [&](std::size_t p) {
        diff[p] = variant_density(m, variant, t, wt[p * np + c], points[i]) -
                  variant_density(m, variant, s, w_s[p], points[i]);
      });
      std::vector<std::vector<double>> groups(cuts.size() + 1);
      for (std::size_t p = 0; p < cfg.n_paths; ++p) groups[bin_of(cuts, w_s[p])].push_back(diff[p]);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) continue;
        rep.bins.push_back(summarize(c, "x" + std::to_string(i) + "/w" + std::to_string(g), groups[g]));
      }
    }
  }
  finish(rep, cfg.alpha, cfg.z_threshold);
  return rep;
}

}  // namespace enlarge::mc
