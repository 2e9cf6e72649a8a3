// SPDX-License-Identifier: Apache-2.0
//
// Exact probability calculus on a finite sample space. Sigma-algebras are
// partitions, filtrations are refining partition sequences on a discrete
// grid, and "predictable at t_j" means measurable at t_{j-1}.
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace enlarge::finite {

/// Absolute tolerance used in place of exact equality (scaled by 1 + |x|).
inline constexpr double kExactTol = 1e-12;

using RandomVariable = std::vector<double>;

class FiniteProbSpace {
 public:
  /// Weights must be strictly positive and sum to 1 within 1e-12.
  explicit FiniteProbSpace(std::vector<double> weights);

  std::size_t size() const noexcept { return p_.size(); }
  double prob(std::size_t atom) const { return p_[atom]; }
  std::span<const double> weights() const noexcept { return p_; }
  double expectation(std::span<const double> x) const;

 private:
  std::vector<double> p_;
};

class Partition {
 public:
  Partition() = default;

  /// Blocks are numbered in order of first appearance.
  static Partition from_labels(std::span<const long> labels);
  static Partition from_blocks(const std::vector<std::vector<std::size_t>>& blocks,
                               std::size_t atoms);
  static Partition trivial(std::size_t atoms);
  static Partition discrete(std::size_t atoms);

  std::size_t atom_count() const noexcept { return label_.size(); }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t block_of(std::size_t atom) const { return label_[atom]; }
  const std::vector<std::size_t>& block(std::size_t b) const { return blocks_[b]; }
  const std::vector<std::vector<std::size_t>>& blocks() const noexcept { return blocks_; }
  std::span<const std::size_t> labels() const noexcept { return label_; }

  /// True if every block of *this lies inside a block of `coarser`.
  bool refines(const Partition& coarser) const;
  /// Coarsest common refinement.
  Partition join(const Partition& other) const;
  /// True if both partitions induce the same partition of `subset` (0/1 per atom).
  bool same_on(const Partition& other, std::span<const char> subset) const;
  /// True if `event` (0/1 per atom) is a union of blocks.
  bool contains_event(std::span<const char> event) const;
  bool measurable(std::span<const double> x, double tol = kExactTol) const;

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.label_ == b.label_;
  }

 private:
  explicit Partition(std::vector<std::size_t> canonical_labels);

  std::vector<std::size_t> label_;
  std::vector<std::vector<std::size_t>> blocks_;
};

/// Partition generated by a per-atom key vector (keys need operator<).
template <class Key>
Partition partition_by(const std::vector<Key>& keys) {
  std::map<Key, long> ids;
  std::vector<long> labels(keys.size());
  for (std::size_t w = 0; w < keys.size(); ++w) {
    labels[w] = ids.try_emplace(keys[w], static_cast<long>(ids.size())).first->second;
  }
  return Partition::from_labels(labels);
}

class PartitionFiltration {
 public:
  PartitionFiltration() = default;
  /// Requires a strictly increasing grid, equal atom counts and monotone refinement.
  PartitionFiltration(std::vector<double> grid, std::vector<Partition> partitions);

  std::size_t steps() const noexcept { return grid_.size(); }
  std::size_t atom_count() const noexcept {
    return parts_.empty() ? 0 : parts_.front().atom_count();
  }
  const std::vector<double>& grid() const noexcept { return grid_; }
  const Partition& at(std::size_t j) const { return parts_[j]; }
  const std::vector<Partition>& partitions() const noexcept { return parts_; }

  /// Refines `coarser` at every grid point.
  bool refines(const PartitionFiltration& coarser) const;

 private:
  std::vector<double> grid_;
  std::vector<Partition> parts_;
};

/// Values indexed by (time, atom), row-major by time.
class Path {
 public:
  Path() = default;
  Path(std::size_t steps, std::size_t atoms, double fill = 0.0)
      : steps_(steps), atoms_(atoms), v_(steps * atoms, fill) {}
  /// Same random variable at every grid time.
  static Path constant(std::size_t steps, std::span<const double> x);

  std::size_t steps() const noexcept { return steps_; }
  std::size_t atoms() const noexcept { return atoms_; }
  double& operator()(std::size_t j, std::size_t w) { return v_[j * atoms_ + w]; }
  double operator()(std::size_t j, std::size_t w) const { return v_[j * atoms_ + w]; }
  std::span<double> row(std::size_t j) { return {v_.data() + j * atoms_, atoms_}; }
  std::span<const double> row(std::size_t j) const { return {v_.data() + j * atoms_, atoms_}; }
  const std::vector<double>& data() const noexcept { return v_; }

  Path& operator+=(const Path& o);
  Path& operator-=(const Path& o);
  friend Path operator+(Path a, const Path& b) { return a += b; }
  friend Path operator-(Path a, const Path& b) { return a -= b; }
  /// Pointwise product.
  friend Path hadamard(const Path& a, const Path& b);
  /// Multiplies every row by the random variable x.
  friend Path scale_by(const Path& a, std::span<const double> x);
  /// Row j holds a_j - a_{j-1}; row 0 is zero.
  Path increments() const;
  /// Partial sums of rows 1..j; row 0 of `inc` is ignored.
  static Path from_increments(const Path& inc);

  double max_abs() const;

 private:
  std::size_t steps_ = 0;
  std::size_t atoms_ = 0;
  std::vector<double> v_;
};

Path hadamard(const Path& a, const Path& b);
Path scale_by(const Path& a, std::span<const double> x);
double max_abs_diff(const Path& a, const Path& b);

// -- operations -------------------------------------------------------------

RandomVariable conditional_expectation(const FiniteProbSpace& space,
                                       std::span<const double> x, const Partition& p);

/// P(event | p) per atom.
RandomVariable conditional_probability(const FiniteProbSpace& space,
                                       std::span<const char> event, const Partition& p);

bool is_adapted(const Path& x, const PartitionFiltration& f, double tol = kExactTol);

/// Largest |E[X_j - X_{j-1} | F_{j-1}]| over all j and atoms.
double max_conditional_increment(const FiniteProbSpace& space, const Path& x,
                                 const PartitionFiltration& f);

bool is_martingale(const FiniteProbSpace& space, const Path& x,
                   const PartitionFiltration& f, double tol = kExactTol);

Path optional_projection(const FiniteProbSpace& space, const Path& x,
                         const PartitionFiltration& f);

/// At t_j (j >= 1) projects on F_{j-1}; at t_0 on F_0.
Path predictable_projection(const FiniteProbSpace& space, const Path& x,
                            const PartitionFiltration& f);

/// Compensator: A_0 = 0 and dA_j = E[dV_j | F_{j-1}].
Path dual_predictable_projection(const FiniteProbSpace& space, const Path& v,
                                 const PartitionFiltration& f);

struct DoobDecomposition {
  Path martingale;
  Path drift;
};

/// Throws NotAdapted if x is not F-adapted.
DoobDecomposition doob_decomposition(const FiniteProbSpace& space, const Path& x,
                                     const PartitionFiltration& f);

/// Compensator of sum dM dN. Throws NotMartingale unless both inputs are F-martingales.
Path predictable_bracket(const FiniteProbSpace& space, const Path& m, const Path& n,
                         const PartitionFiltration& f);

}  // namespace enlarge::finite
