#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lgnb/rng.hpp"

namespace lgnb {

/// Lower-triangular row-stochastic table
///   F(1,1) = 1,  F(m,j) = (m-1)/m F(m-1,j) + 1/m F(m-1,j-1),
/// i.e. unsigned Stirling numbers of the first kind divided by m!.
/// Rows are stored for m = 0..m_max with entries j = 0..m; row 0 is the
/// point mass at j = 0 and F(m,0) = 0 for m >= 1.
class FTable {
 public:
  explicit FTable(std::size_t m_max);

  std::size_t m_max() const { return m_max_; }
  double operator()(std::size_t m, std::size_t j) const;
  std::span<const double> row(std::size_t m) const;

 private:
  std::size_t m_max_;
  std::vector<double> entries_;
};

/// Posterior of the table count L given y = m customers:
///   R_r(m,j) = F(m,j) r^j / sum_j' F(m,j') r^j'.
/// Built by the same recurrence as F with weight r on the "new table" branch
/// and every row renormalized, so entries stay in [0, 1] for any r > 0.
class RrTable {
 public:
  RrTable(std::size_t m_max, double r);

  std::size_t m_max() const { return m_max_; }
  double r() const { return r_; }
  double operator()(std::size_t m, std::size_t j) const;
  std::span<const double> row(std::size_t m) const;
  /// sum_j j R_r(m, j)
  double row_mean(std::size_t m) const { return means_.at(m); }

 private:
  std::size_t m_max_;
  double r_;
  std::vector<double> entries_;
  std::vector<double> means_;
};

FTable build_f_table(std::size_t m_max);
RrTable build_rr_table(std::size_t m_max, double r);

/// Categorical draw of L from row y of the table; 0 when y = 0.
std::uint64_t sample_table_count(std::uint64_t y, const RrTable& table, RngStream& rng);

/// <L> = sum_j j R(y, j) for a table built at r~ = exp(<ln r>).
double expected_table_count(std::uint64_t y, const RrTable& table);

}  // namespace lgnb
