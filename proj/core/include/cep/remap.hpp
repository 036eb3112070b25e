#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cep/query.hpp"

namespace cep {

// Piecewise-linear compaction of the retained subranges {[a_j, b_j]} of a numerical column
// onto [new_lower, new_lower + (upper - lower)]:
//
//   x' = (x - a_j + offset_j) / sum_n (b_n - a_n) * (upper - lower) + new_lower
//
// where offset_j is the total length of the subranges before j.
struct NumericRemap {
  double lower = 0.0;
  double upper = 0.0;
  double new_lower = 0.0;
  std::vector<Interval> subranges;  // sorted, disjoint
  std::vector<double> offsets;

  double retained_length() const;
  // Single subrange spanning [lower, upper].
  bool identity() const;

  // Index of the subrange holding x, if any.
  std::optional<size_t> subrange_of(double x) const;

  // Throws GapError when x lies outside every retained subrange.
  double apply(double x) const;

  // Nearest retained value >= x (used for a range's lower end), or nullopt past the last
  // subrange.
  std::optional<double> clamp_up(double x) const;
  // Nearest retained value <= x (a range's upper end), or nullopt before the first one.
  std::optional<double> clamp_down(double x) const;
  // Closest retained boundary to x (either direction).
  double clamp_nearest(double x) const;

  // Throws ValidationError when the invariants do not hold.
  void validate() const;
};

// Builds the remap from retained values: a gap is any stretch of length >=
// gap_fraction * (upper - lower) without a retained value (including before the first and
// after the last value). With `deleted_values`, only stretches holding at least one of them
// count as gaps. Throws ValidationError on empty input.
NumericRemap build_numeric_remap(double lower, double upper, std::span<const double> retained_values,
                                 double gap_fraction,
                                 std::optional<std::span<const double>> deleted_values = std::nullopt);

}  // namespace cep
