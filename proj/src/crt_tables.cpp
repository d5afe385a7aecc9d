#include "lgnb/crt_tables.hpp"

#include <cmath>
#include <string>

#include "lgnb/errors.hpp"

namespace lgnb {

namespace {

constexpr std::size_t row_offset(std::size_t m) { return m * (m + 1) / 2; }

void check_row(std::size_t m, std::size_t m_max) {
  if (m > m_max) {
    throw DomainError("table row " + std::to_string(m) + " exceeds m_max " +
                      std::to_string(m_max) + "; size the table to max(y)");
  }
}

}  // namespace

FTable::FTable(std::size_t m_max) : m_max_(m_max), entries_(row_offset(m_max + 1), 0.0) {
  if (m_max == 0) throw DomainError("build_f_table: m_max must be >= 1");
  entries_[0] = 1.0;
  entries_[row_offset(1) + 1] = 1.0;
  for (std::size_t m = 2; m <= m_max; ++m) {
    const double* prev = &entries_[row_offset(m - 1)];
    double* cur = &entries_[row_offset(m)];
    const double stay = static_cast<double>(m - 1) / static_cast<double>(m);
    const double open = 1.0 / static_cast<double>(m);
    for (std::size_t j = 1; j <= m; ++j) {
      const double keep = j <= m - 1 ? prev[j] : 0.0;
      cur[j] = stay * keep + open * prev[j - 1];
    }
  }
}

double FTable::operator()(std::size_t m, std::size_t j) const {
  check_row(m, m_max_);
  return j > m ? 0.0 : entries_[row_offset(m) + j];
}

std::span<const double> FTable::row(std::size_t m) const {
  check_row(m, m_max_);
  return {entries_.data() + row_offset(m), m + 1};
}

RrTable::RrTable(std::size_t m_max, double r)
    : m_max_(m_max), r_(r), entries_(row_offset(m_max + 1), 0.0), means_(m_max + 1, 0.0) {
  if (m_max == 0) throw DomainError("build_rr_table: m_max must be >= 1");
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw DomainError("build_rr_table: r must be positive and finite, got " + std::to_string(r));
  }
  entries_[0] = 1.0;
  entries_[row_offset(1) + 1] = 1.0;
  means_[1] = 1.0;
  for (std::size_t m = 2; m <= m_max; ++m) {
    const double* prev = &entries_[row_offset(m - 1)];
    double* cur = &entries_[row_offset(m)];
    const double stay = static_cast<double>(m - 1) / static_cast<double>(m);
    const double open = r / static_cast<double>(m);
    double total = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      const double keep = j <= m - 1 ? prev[j] : 0.0;
      cur[j] = stay * keep + open * prev[j - 1];
      total += cur[j];
    }
    double mean = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] /= total;
      mean += static_cast<double>(j) * cur[j];
    }
    means_[m] = mean;
  }
}

double RrTable::operator()(std::size_t m, std::size_t j) const {
  check_row(m, m_max_);
  return j > m ? 0.0 : entries_[row_offset(m) + j];
}

std::span<const double> RrTable::row(std::size_t m) const {
  check_row(m, m_max_);
  return {entries_.data() + row_offset(m), m + 1};
}

FTable build_f_table(std::size_t m_max) { return FTable(m_max); }

RrTable build_rr_table(std::size_t m_max, double r) { return RrTable(m_max, r); }

std::uint64_t sample_table_count(std::uint64_t y, const RrTable& table, RngStream& rng) {
  if (y == 0) return 0;
  const auto probs = table.row(static_cast<std::size_t>(y));
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t j = 1; j < probs.size(); ++j) {
    cdf += probs[j];
    if (u <= cdf) return j;
  }
  // Rounding left the cumulative sum just below u; take the last non-zero cell.
  for (std::size_t j = probs.size() - 1; j >= 1; --j) {
    if (probs[j] > 0.0) return j;
  }
  return 1;
}

double expected_table_count(std::uint64_t y, const RrTable& table) {
  if (y == 0) return 0.0;
  if (y > table.m_max()) {
    throw DomainError("expected_table_count: y exceeds table m_max");
  }
  return table.row_mean(static_cast<std::size_t>(y));
}

}  // namespace lgnb
