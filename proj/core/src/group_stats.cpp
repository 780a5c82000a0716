// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "uala/calibration.hpp"
#include "uala/error.hpp"

namespace uala {

using nlohmann::json;

GroupStats compare_groups(std::span<const double> correct, std::span<const double> incorrect) {
  if (correct.size() < 2 || incorrect.size() < 2) {
    throw Error(ErrorCode::InsufficientData,
                fmt::format("need >= 2 values per group, got {} correct / {} incorrect", correct.size(),
                            incorrect.size()));
  }
  const auto n1 = static_cast<double>(correct.size());
  const auto n2 = static_cast<double>(incorrect.size());
  const double m1 = std::accumulate(correct.begin(), correct.end(), 0.0) / n1;
  const double m2 = std::accumulate(incorrect.begin(), incorrect.end(), 0.0) / n2;
  // A constant group has zero spread even when its mean carries rounding error.
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  double ss1 = 0.0;
  double ss2 = 0.0;
  if (!constant(correct)) for (double x : correct) ss1 += (x - m1) * (x - m1);
  if (!constant(incorrect)) for (double x : incorrect) ss2 += (x - m2) * (x - m2);
  const double v1 = ss1 / (n1 - 1.0);
  const double v2 = ss2 / (n2 - 1.0);

  GroupStats s;
  s.n_correct = correct.size();
  s.n_incorrect = incorrect.size();
  s.mean_correct = m1;
  s.mean_incorrect = m2;
  s.mean_diff = m2 - m1;

  const double se1 = v1 / n1;
  const double se2 = v2 / n2;
  if (se1 + se2 == 0.0) {
    s.degenerate_variance = true;
    // Equal constant groups: no effect at all. Unequal ones have no finite d.
    if (s.mean_diff == 0.0) s.cohens_d = 0.0;
    return s;
  }
  const double t = s.mean_diff / std::sqrt(se1 + se2);
  const double df = (se1 + se2) * (se1 + se2) / (se1 * se1 / (n1 - 1.0) + se2 * se2 / (n2 - 1.0));
  const boost::math::students_t dist(df);
  s.t_statistic = t;
  s.degrees_of_freedom = df;
  s.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));

  const double pooled = std::sqrt((ss1 + ss2) / (n1 + n2 - 2.0));
  s.cohens_d = s.mean_diff / pooled + 0.0;
  return s;
}

json group_stats_to_json(const GroupStats& s) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"n_correct", s.n_correct},
          {"n_incorrect", s.n_incorrect},
          {"mean_correct", s.mean_correct},
          {"mean_incorrect", s.mean_incorrect},
          {"mean_diff", s.mean_diff},
          {"t_statistic", opt(s.t_statistic)},
          {"degrees_of_freedom", opt(s.degrees_of_freedom)},
          {"p_value", opt(s.p_value)},
          {"cohens_d", opt(s.cohens_d)},
          {"degenerate_variance", s.degenerate_variance},
          {"test", GroupStats::kTest},
          {"effect_size", GroupStats::kEffectSize}};
}

}  // namespace uala
