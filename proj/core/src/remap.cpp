#include "cep/remap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cep/error.hpp"
#include "cep/table.hpp"

namespace cep {

double NumericRemap::retained_length() const {
  double total = 0.0;
  for (const auto& s : subranges) {
    total += s.hi - s.lo;
  }
  return total;
}

bool NumericRemap::identity() const {
  return subranges.size() == 1 && subranges.front().lo == lower && subranges.front().hi == upper &&
         new_lower == lower;
}

std::optional<size_t> NumericRemap::subrange_of(double x) const {
  for (size_t j = 0; j < subranges.size(); ++j) {
    if (x >= subranges[j].lo && x <= subranges[j].hi) {
      return j;
    }
  }
  return std::nullopt;
}

double NumericRemap::apply(double x) const {
  const auto j = subrange_of(x);
  if (!j) {
    throw GapError("value " + format_double(x) + " lies in a deleted gap");
  }
  return (x - subranges[*j].lo + offsets[*j]) / retained_length() * (upper - lower) + new_lower;
}

std::optional<double> NumericRemap::clamp_up(double x) const {
  for (const auto& s : subranges) {
    if (x <= s.hi) {
      return std::max(x, s.lo);
    }
  }
  return std::nullopt;
}

std::optional<double> NumericRemap::clamp_down(double x) const {
  for (auto it = subranges.rbegin(); it != subranges.rend(); ++it) {
    if (x >= it->lo) {
      return std::min(x, it->hi);
    }
  }
  return std::nullopt;
}

double NumericRemap::clamp_nearest(double x) const {
  if (subrange_of(x)) {
    return x;
  }
  const auto up = clamp_up(x);
  const auto down = clamp_down(x);
  if (!up) {
    return *down;
  }
  if (!down) {
    return *up;
  }
  return (*up - x) < (x - *down) ? *up : *down;
}

void NumericRemap::validate() const {
  if (subranges.empty() || subranges.size() != offsets.size()) {
    throw ValidationError("numeric remap needs one offset per subrange");
  }
  if (!(retained_length() > 0.0)) {
    throw ValidationError("numeric remap has zero retained length");
  }
  double offset = 0.0;
  for (size_t j = 0; j < subranges.size(); ++j) {
    const auto& s = subranges[j];
    if (s.lo > s.hi || s.lo < lower || s.hi > upper || (j > 0 && s.lo <= subranges[j - 1].hi)) {
      throw ValidationError("numeric remap subranges must be sorted, disjoint and inside the bounds");
    }
    if (offsets[j] != offset) {
      throw ValidationError("numeric remap offsets are inconsistent");
    }
    offset += s.hi - s.lo;
  }
}

NumericRemap build_numeric_remap(double lower, double upper, std::span<const double> retained_values,
                                 double gap_fraction, std::optional<std::span<const double>> deleted_values) {
  if (retained_values.empty()) {
    throw ValidationError("cannot build a numeric remap without retained values");
  }
  auto values = sorted_distinct(retained_values);
  const double threshold = gap_fraction * (upper - lower);
  std::vector<double> deleted;
  if (deleted_values) {
    deleted = sorted_distinct(*deleted_values);
  }
  // Open interval (lo, hi) holds a deleted value, or any value when none are given.
  const auto holds_deleted = [&](double lo, double hi) {
    if (!deleted_values) {
      return true;
    }
    const auto it = std::upper_bound(deleted.begin(), deleted.end(), lo);
    return it != deleted.end() && *it < hi;
  };

  NumericRemap remap;
  remap.lower = lower;
  remap.upper = upper;
  remap.new_lower = lower;

  const auto below = std::nextafter(lower, -std::numeric_limits<double>::infinity());
  const auto above = std::nextafter(upper, std::numeric_limits<double>::infinity());
  const double first =
      values.front() - lower >= threshold && holds_deleted(below, values.front()) ? values.front() : lower;
  const double last = upper - values.back() >= threshold && holds_deleted(values.back(), above) ? values.back() : upper;
  double start = first;
  for (size_t i = 1; i < values.size(); ++i) {
    if (values[i] - values[i - 1] >= threshold && holds_deleted(values[i - 1], values[i])) {
      remap.subranges.push_back(Interval{start, values[i - 1]});
      start = values[i];
    }
  }
  remap.subranges.push_back(Interval{start, last});

  // Degenerate single points carry no length; widen the outer ends back to the bounds.
  if (!(remap.retained_length() > 0.0)) {
    remap.subranges.front().lo = lower;
    remap.subranges.back().hi = upper;
  }
  double offset = 0.0;
  for (const auto& s : remap.subranges) {
    remap.offsets.push_back(offset);
    offset += s.hi - s.lo;
  }
  remap.validate();
  return remap;
}

}  // namespace cep
