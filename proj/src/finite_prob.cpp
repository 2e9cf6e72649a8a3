// SPDX-License-Identifier: Apache-2.0
#include "enlarge/finite_prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "enlarge/error.hpp"

namespace enlarge::finite {

namespace {

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

void require_shape(const Path& x, const PartitionFiltration& f, const char* who) {
  if (x.steps() != f.steps() || x.atoms() != f.atom_count()) {
    throw GridMismatch(std::string(who) + ": path is " + std::to_string(x.steps()) + "x" +
                       std::to_string(x.atoms()) + ", filtration is " +
                       std::to_string(f.steps()) + "x" + std::to_string(f.atom_count()));
  }
}

void require_same_shape(const Path& a, const Path& b, const char* who) {
  if (a.steps() != b.steps() || a.atoms() != b.atoms()) {
    throw GridMismatch(std::string(who) + ": paths have different shapes");
  }
}

// Block averages written back per atom.
void block_average(const FiniteProbSpace& space, std::span<const double> x, const Partition& p,
                   std::span<double> out) {
  for (const auto& blk : p.blocks()) {
    double mass = 0.0, acc = 0.0;
    for (std::size_t w : blk) {
      mass += space.prob(w);
      acc += space.prob(w) * x[w];
    }
    const double avg = acc / mass;
    for (std::size_t w : blk) out[w] = avg;
  }
}

}  // namespace

FiniteProbSpace::FiniteProbSpace(std::vector<double> weights) : p_(std::move(weights)) {
  if (p_.empty()) throw InvalidArgument("FiniteProbSpace: no atoms");
  double total = 0.0;
  for (double w : p_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("FiniteProbSpace: atom weights must be strictly positive");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("FiniteProbSpace: weights sum to " + std::to_string(total));
  }
}

double FiniteProbSpace::expectation(std::span<const double> x) const {
  if (x.size() != p_.size()) throw GridMismatch("expectation: size mismatch");
  double acc = 0.0;
  for (std::size_t w = 0; w < p_.size(); ++w) acc += p_[w] * x[w];
  return acc;
}

// -- Partition ----------------------------------------------------------------

Partition::Partition(std::vector<std::size_t> canonical_labels)
    : label_(std::move(canonical_labels)) {
  std::size_t nb = 0;
  for (std::size_t l : label_) nb = std::max(nb, l + 1);
  blocks_.resize(nb);
  for (std::size_t w = 0; w < label_.size(); ++w) blocks_[label_[w]].push_back(w);
}

Partition Partition::from_labels(std::span<const long> labels) {
  std::map<long, std::size_t> ids;
  std::vector<std::size_t> canon(labels.size());
  for (std::size_t w = 0; w < labels.size(); ++w) {
    canon[w] = ids.try_emplace(labels[w], ids.size()).first->second;
  }
  return Partition(std::move(canon));
}

Partition Partition::from_blocks(const std::vector<std::vector<std::size_t>>& blocks,
                                 std::size_t atoms) {
  std::vector<long> labels(atoms, -1);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].empty()) throw InvalidArgument("Partition: empty block");
    for (std::size_t w : blocks[b]) {
      if (w >= atoms) throw InvalidArgument("Partition: atom index out of range");
      if (labels[w] != -1) throw InvalidArgument("Partition: blocks overlap");
      labels[w] = static_cast<long>(b);
    }
  }
  if (std::find(labels.begin(), labels.end(), -1L) != labels.end()) {
    throw InvalidArgument("Partition: blocks do not cover all atoms");
  }
  return from_labels(labels);
}

Partition Partition::trivial(std::size_t atoms) {
  return Partition(std::vector<std::size_t>(atoms, 0));
}

Partition Partition::discrete(std::size_t atoms) {
  std::vector<std::size_t> l(atoms);
  std::iota(l.begin(), l.end(), std::size_t{0});
  return Partition(std::move(l));
}

bool Partition::refines(const Partition& coarser) const {
  if (coarser.atom_count() != atom_count()) return false;
  for (const auto& blk : blocks_) {
    const std::size_t c = coarser.label_[blk.front()];
    for (std::size_t w : blk) {
      if (coarser.label_[w] != c) return false;
    }
  }
  return true;
}

Partition Partition::join(const Partition& other) const {
  if (other.atom_count() != atom_count()) throw GridMismatch("join: atom count mismatch");
  std::vector<std::pair<std::size_t, std::size_t>> keys(atom_count());
  for (std::size_t w = 0; w < keys.size(); ++w) keys[w] = {label_[w], other.label_[w]};
  return partition_by(keys);
}

bool Partition::same_on(const Partition& other, std::span<const char> subset) const {
  if (other.atom_count() != atom_count() || subset.size() != atom_count()) {
    throw GridMismatch("same_on: atom count mismatch");
  }
  // Two induced partitions agree iff the label maps are mutually functional on the subset.
  std::map<std::size_t, std::size_t> fwd, bwd;
  for (std::size_t w = 0; w < atom_count(); ++w) {
    if (!subset[w]) continue;
    auto [f, fnew] = fwd.try_emplace(label_[w], other.label_[w]);
    auto [b, bnew] = bwd.try_emplace(other.label_[w], label_[w]);
    if (f->second != other.label_[w] || b->second != label_[w]) return false;
  }
  return true;
}

bool Partition::contains_event(std::span<const char> event) const {
  if (event.size() != atom_count()) throw GridMismatch("contains_event: size mismatch");
  for (const auto& blk : blocks_) {
    const bool in = event[blk.front()] != 0;
    for (std::size_t w : blk) {
      if ((event[w] != 0) != in) return false;
    }
  }
  return true;
}

bool Partition::measurable(std::span<const double> x, double tol) const {
  if (x.size() != atom_count()) throw GridMismatch("measurable: size mismatch");
  for (const auto& blk : blocks_) {
    const double v = x[blk.front()];
    for (std::size_t w : blk) {
      if (!close(x[w], v, tol)) return false;
    }
  }
  return true;
}

// -- PartitionFiltration ------------------------------------------------------

PartitionFiltration::PartitionFiltration(std::vector<double> grid,
                                         std::vector<Partition> partitions)
    : grid_(std::move(grid)), parts_(std::move(partitions)) {
  if (grid_.empty() || grid_.size() != parts_.size()) {
    throw GridMismatch("PartitionFiltration: need one partition per grid point");
  }
  for (std::size_t j = 1; j < grid_.size(); ++j) {
    if (!(grid_[j] > grid_[j - 1])) {
      throw InvalidArgument("PartitionFiltration: grid must be strictly increasing");
    }
    if (parts_[j].atom_count() != parts_[0].atom_count()) {
      throw GridMismatch("PartitionFiltration: atom count changes along the grid");
    }
    if (!parts_[j].refines(parts_[j - 1])) {
      throw InvalidArgument("PartitionFiltration: partition at step " + std::to_string(j) +
                            " does not refine its predecessor");
    }
  }
}

bool PartitionFiltration::refines(const PartitionFiltration& coarser) const {
  if (coarser.steps() != steps()) return false;
  for (std::size_t j = 0; j < steps(); ++j) {
    if (!parts_[j].refines(coarser.parts_[j])) return false;
  }
  return true;
}

// -- Path ---------------------------------------------------------------------

Path Path::constant(std::size_t steps, std::span<const double> x) {
  Path p(steps, x.size());
  for (std::size_t j = 0; j < steps; ++j) std::copy(x.begin(), x.end(), p.row(j).begin());
  return p;
}

Path& Path::operator+=(const Path& o) {
  require_same_shape(*this, o, "Path::operator+=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}

Path& Path::operator-=(const Path& o) {
  require_same_shape(*this, o, "Path::operator-=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}

Path hadamard(const Path& a, const Path& b) {
  require_same_shape(a, b, "hadamard");
  Path out = a;
  for (std::size_t i = 0; i < out.v_.size(); ++i) out.v_[i] *= b.v_[i];
  return out;
}

Path scale_by(const Path& a, std::span<const double> x) {
  if (x.size() != a.atoms()) throw GridMismatch("scale_by: size mismatch");
  Path out = a;
  for (std::size_t j = 0; j < a.steps(); ++j) {
    for (std::size_t w = 0; w < a.atoms(); ++w) out(j, w) *= x[w];
  }
  return out;
}

Path Path::increments() const {
  Path d(steps_, atoms_);
  for (std::size_t j = 1; j < steps_; ++j) {
    for (std::size_t w = 0; w < atoms_; ++w) d(j, w) = (*this)(j, w) - (*this)(j - 1, w);
  }
  return d;
}

Path Path::from_increments(const Path& inc) {
  Path a(inc.steps(), inc.atoms());
  for (std::size_t j = 1; j < inc.steps(); ++j) {
    for (std::size_t w = 0; w < inc.atoms(); ++w) a(j, w) = a(j - 1, w) + inc(j, w);
  }
  return a;
}

double Path::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const Path& a, const Path& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

// -- operations ---------------------------------------------------------------

RandomVariable conditional_expectation(const FiniteProbSpace& space, std::span<const double> x,
                                       const Partition& p) {
  if (x.size() != space.size() || p.atom_count() != space.size()) {
    throw GridMismatch("conditional_expectation: size mismatch");
  }
  RandomVariable out(x.size());
  block_average(space, x, p, out);
  return out;
}

RandomVariable conditional_probability(const FiniteProbSpace& space,
                                       std::span<const char> event, const Partition& p) {
  RandomVariable ind(event.size());
  for (std::size_t w = 0; w < event.size(); ++w) ind[w] = event[w] ? 1.0 : 0.0;
  return conditional_expectation(space, ind, p);
}

bool is_adapted(const Path& x, const PartitionFiltration& f, double tol) {
  require_shape(x, f, "is_adapted");
  for (std::size_t j = 0; j < f.steps(); ++j) {
    if (!f.at(j).measurable(x.row(j), tol)) return false;
  }
  return true;
}

double max_conditional_increment(const FiniteProbSpace& space, const Path& x,
                                 const PartitionFiltration& f) {
  require_shape(x, f, "max_conditional_increment");
  const Path d = x.increments();
  RandomVariable ce(x.atoms());
  double m = 0.0;
  for (std::size_t j = 1; j < f.steps(); ++j) {
    block_average(space, d.row(j), f.at(j - 1), ce);
    for (double c : ce) m = std::max(m, std::abs(c));
  }
  return m;
}

bool is_martingale(const FiniteProbSpace& space, const Path& x, const PartitionFiltration& f,
                   double tol) {
  if (!is_adapted(x, f, tol)) return false;
  return max_conditional_increment(space, x, f) <= tol * (1.0 + x.max_abs());
}

Path optional_projection(const FiniteProbSpace& space, const Path& x,
                         const PartitionFiltration& f) {
  require_shape(x, f, "optional_projection");
  Path out(x.steps(), x.atoms());
  for (std::size_t j = 0; j < f.steps(); ++j) block_average(space, x.row(j), f.at(j), out.row(j));
  return out;
}

Path predictable_projection(const FiniteProbSpace& space, const Path& x,
                            const PartitionFiltration& f) {
  require_shape(x, f, "predictable_projection");
  Path out(x.steps(), x.atoms());
  for (std::size_t j = 0; j < f.steps(); ++j) {
    block_average(space, x.row(j), f.at(j == 0 ? 0 : j - 1), out.row(j));
  }
  return out;
}

Path dual_predictable_projection(const FiniteProbSpace& space, const Path& v,
                                 const PartitionFiltration& f) {
  require_shape(v, f, "dual_predictable_projection");
  Path d = v.increments();
  for (std::size_t j = 1; j < f.steps(); ++j) block_average(space, d.row(j), f.at(j - 1), d.row(j));
  return Path::from_increments(d);
}

DoobDecomposition doob_decomposition(const FiniteProbSpace& space, const Path& x,
                                     const PartitionFiltration& f) {
  require_shape(x, f, "doob_decomposition");
  if (!is_adapted(x, f)) throw NotAdapted("doob_decomposition: process is not adapted");
  DoobDecomposition out;
  out.drift = dual_predictable_projection(space, x, f);
  out.martingale = x - out.drift;
  return out;
}

Path predictable_bracket(const FiniteProbSpace& space, const Path& m, const Path& n,
                         const PartitionFiltration& f) {
  require_shape(m, f, "predictable_bracket");
  require_shape(n, f, "predictable_bracket");
  if (!is_martingale(space, m, f)) throw NotMartingale("predictable_bracket: first argument");
  if (!is_martingale(space, n, f)) throw NotMartingale("predictable_bracket: second argument");
  return dual_predictable_projection(space, Path::from_increments(hadamard(m.increments(), n.increments())), f);
}

}  // namespace enlarge::finite
