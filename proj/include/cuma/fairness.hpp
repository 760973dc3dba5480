#pragma once

// Group-fairness metrics over hard predictions. Stored as fractions;
// reporting layers convert to percentages.

#include <cmath>
#include <span>

#include "cuma/common.hpp"

namespace cuma::fair {

// Per (a, y) cell tallies. delta_eo is undefined on empty cells and the
// metric functions refuse to fake a zero there.
struct GroupConfusion {
  long total[2][2] = {{0, 0}, {0, 0}};
  long errors[2][2] = {{0, 0}, {0, 0}};

  static GroupConfusion tally(std::span<const int> yhat, std::span<const int> y,
                              std::span<const int> a) {
    require(yhat.size() == y.size() && y.size() == a.size(),
            "confusion: prediction/label/group lengths differ");
    GroupConfusion c;
    for (std::size_t i = 0; i < y.size(); ++i) {
      require(y[i] == 0 || y[i] == 1, "confusion: labels must be binary");
      require(a[i] == 0 || a[i] == 1, "confusion: sensitive attribute must be binary");
      c.total[a[i]][y[i]] += 1;
      if (yhat[i] != y[i]) c.errors[a[i]][y[i]] += 1;
    }
    return c;
  }

  double error_rate(int a, int y) const {
    require(total[a][y] > 0, "delta_eo undefined: empty cell (a=", a, ", y=", y, ")");
    return static_cast<double>(errors[a][y]) / static_cast<double>(total[a][y]);
  }
};

// Summed absolute gap of false positive and false negative rates, in [0,2].
inline double delta_eo(std::span<const int> yhat, std::span<const int> y,
                       std::span<const int> a) {
  GroupConfusion c = GroupConfusion::tally(yhat, y, a);
  double d = 0.0;
  for (int yy = 0; yy < 2; ++yy) d += std::fabs(c.error_rate(0, yy) - c.error_rate(1, yy));
  return d;
}

// Absolute gap of positive prediction rates, in [0,1].
inline double delta_dp(std::span<const int> yhat, std::span<const int> a) {
  require(yhat.size() == a.size(), "delta_dp: prediction/group lengths differ");
  long n[2] = {0, 0};
  long pos[2] = {0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i] == 0 || a[i] == 1, "delta_dp: sensitive attribute must be binary");
    n[a[i]] += 1;
    if (yhat[i] == 1) pos[a[i]] += 1;
  }
  require(n[0] > 0 && n[1] > 0, "delta_dp undefined: empty sensitive group");
  return std::fabs(static_cast<double>(pos[0]) / n[0] - static_cast<double>(pos[1]) / n[1]);
}

inline double accuracy(std::span<const int> yhat, std::span<const int> y) {
  require(!y.empty() && yhat.size() == y.size(), "accuracy: needs nonempty matching vectors");
  long correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (yhat[i] == y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace cuma::fair
