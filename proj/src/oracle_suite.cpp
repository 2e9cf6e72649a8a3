// SPDX-License-Identifier: Apache-2.0
#include "enlarge/oracle_suite.hpp"

#include <algorithm>
#include <random>

#include "enlarge/error.hpp"

namespace enlarge::oracle {

namespace {

std::mt19937_64 stream(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> random_probabilities(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(n);
  double tot = 0.0;
  for (auto& x : p) tot += (x = u(rng));
  for (auto& x : p) x /= tot;
  // Push the rounding residue into the largest weight so the sum is 1 to the last bit or two.
  double s = 0.0;
  for (double x : p) s += x;
  *std::max_element(p.begin(), p.end()) += 1.0 - s;
  return p;
}

// Increasing stopping times of f, the last one identically never.
std::vector<std::vector<std::size_t>> random_stopping_times(const PartitionFiltration& f,
                                                            std::size_t count,
                                                            std::mt19937_64& rng) {
  std::bernoulli_distribution flag(0.3);
  const std::size_t A = f.atom_count();
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> prev(A, 0);
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<std::size_t> t(A, kNever);
    for (std::size_t j = 0; j < f.steps(); ++j) {
      for (const auto& blk : f.at(j).blocks()) {
        if (!flag(rng)) continue;
        for (std::size_t w : blk) t[w] = std::min(t[w], j);
      }
    }
    for (std::size_t w = 0; w < A; ++w) t[w] = std::max(t[w], prev[w]);
    prev = t;
    out.push_back(std::move(t));
  }
  out.emplace_back(A, kNever);
  return out;
}

}  // namespace

RandomInstance make_random_instance(const TreeSpec& spec) {
  if (spec.depth == 0 || spec.hidden == 0 || spec.n == 0 || spec.k == 0 || spec.k > spec.n) {
    throw InvalidArgument("make_random_instance: need depth, hidden, n >= 1 and 1 <= k <= n");
  }
  auto rng = stream(spec.seed, 0x7265657374726565ULL);
  const std::size_t leaves = std::size_t{1} << spec.depth;
  const std::size_t A = leaves * spec.hidden;

  std::vector<double> grid;
  std::vector<Partition> parts;
  for (std::size_t j = 0; j <= spec.depth; ++j) {
    std::vector<long> lab(A);
    for (std::size_t w = 0; w < A; ++w) {
      const std::size_t leaf = w / spec.hidden;
      lab[w] = static_cast<long>(leaf >> (spec.depth - j));
    }
    grid.push_back(static_cast<double>(j));
    parts.push_back(Partition::from_labels(lab));
  }
  PartitionFiltration base(grid, parts);

  // Half-integer values on (0, depth] plus infinity.
  std::uniform_int_distribution<std::size_t> tick(1, 2 * spec.depth + 1);
  std::vector<TimeVector> times(A, TimeVector(spec.n));
  for (auto& tv : times) {
    for (auto& t : tv) {
      const std::size_t v = tick(rng);
      t = v > 2 * spec.depth ? ExtendedTime::infinity() : ExtendedTime(0.5 * static_cast<double>(v));
    }
  }

  FiniteProbSpace space(random_probabilities(A, rng));
  std::normal_distribution<double> nd;
  std::vector<double> x(A), eta(A);
  for (auto& v : x) v = nd(rng);
  for (auto& v : eta) v = nd(rng);
  Path m = finite::optional_projection(space, Path::constant(base.steps(), x), base);

  RandomInstance inst{EnlargementSetup(std::move(space), std::move(base), std::move(times), spec.k),
                      std::move(m), std::move(eta), {}, {}};
  const auto& s = inst.setup;
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    std::vector<double> y(A);
    for (auto& v : y) v = nd(rng);
    inst.m_rho.push_back(finite::optional_projection(s.space(), Path::constant(s.steps(), y), s.f_rho(r)));
    inst.stopping.push_back(random_stopping_times(s.fhat(), 3, rng));
  }
  return inst;
}

InstanceResult run_instance(const TreeSpec& spec) {
  const RandomInstance inst = make_random_instance(spec);
  const auto& s = inst.setup;
  InstanceResult res;
  res.spec = spec;
  res.atoms = s.atoms();
  res.hyp_g = check_hyp_g(s).ok();

  const GdeReport gde = gde_verify(s, inst.m);
  res.gde_dev = gde.gde_dev;
  res.gdel_dev = gde.gdel_dev;
  res.fhat_dev = gde.fhat_dev;
  res.psi_ok = gde.psi.on_d_dev <= 1e-12 && gde.psi.off_support_dm == 0.0 &&
               gde.psi.bound_excess <= 1e-12;

  res.t3_ok = true;
  for (std::size_t r = 0; r < s.injections().size(); ++r) {
    const Path m_rho = inst.m - rho_drift(s, r, inst.m).k;
    res.decompminmax_dev = std::max({res.decompminmax_dev, decompminmax_check(s, r, m_rho),
                                     decompminmax_check(s, r, inst.m_rho[r])});
    res.t3_ok = res.t3_ok && lemma_t3_check(s, r, inst.stopping[r]).ok();
  }
  for (std::size_t j = 0; j < s.steps(); ++j) {
    res.cond_dev = std::max(res.cond_dev, lemma_cond_check(s, inst.eta, j));
  }
  return res;
}

std::vector<TreeSpec> suite_specs(const SuiteConfig& cfg) {
  if (cfg.depth_lo == 0 || cfg.depth_lo > cfg.depth_hi || cfg.n_lo == 0 || cfg.n_lo > cfg.n_hi ||
      cfg.k > cfg.n_hi || (cfg.k > 0 && cfg.k > cfg.n_lo)) {
    throw InvalidArgument("suite_specs: inconsistent depth / n / k ranges");
  }
  std::vector<TreeSpec> out;
  for (std::size_t i = 0; i < cfg.seeds; ++i) {
    auto rng = stream(cfg.master_seed, i);
    TreeSpec t;
    t.depth = std::uniform_int_distribution<std::size_t>(cfg.depth_lo, cfg.depth_hi)(rng);
    t.hidden = std::uniform_int_distribution<std::size_t>(2, 3)(rng);
    t.n = std::uniform_int_distribution<std::size_t>(cfg.n_lo, cfg.n_hi)(rng);
    t.k = cfg.k ? cfg.k : std::uniform_int_distribution<std::size_t>(1, t.n)(rng);
    t.seed = rng();
    out.push_back(t);
  }
  return out;
}

std::vector<InstanceResult> run_oracle_suite(const std::vector<TreeSpec>& specs, Exec exec) {
  std::vector<InstanceResult> out(specs.size());
  parallel_for(exec, specs.size(), [&](std::size_t i) { out[i] = run_instance(specs[i]); });
  return out;
}

}  // namespace enlarge::oracle
