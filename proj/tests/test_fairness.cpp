#include <algorithm>
#include <random>
#include <vector>

#include "cuma/fairness.hpp"
#include "gtest/gtest.h"

using namespace cuma;

namespace {

struct Sample {
  std::vector<int> yhat, y, a;
};

Sample random_sample(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> bit(0, 1);
  Sample s;
  s.yhat.resize(n);
  s.y.resize(n);
  s.a.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.yhat[i] = bit(rng);
    s.y[i] = bit(rng);
    s.a[i] = bit(rng);
  }
  return s;
}

bool all_cells_nonempty(const Sample& s) {
  long cnt[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < s.y.size(); ++i) cnt[s.a[i]][s.y[i]]++;
  return cnt[0][0] && cnt[0][1] && cnt[1][0] && cnt[1][1];
}

// Independent tally for the oracle comparison.
double delta_eo_brute(const Sample& s) {
  double d = 0.0;
  for (int y = 0; y < 2; ++y) {
    double rate[2];
    for (int a = 0; a < 2; ++a) {
      long total = 0, wrong = 0;
      for (std::size_t i = 0; i < s.y.size(); ++i) {
        if (s.a[i] == a && s.y[i] == y) {
          ++total;
          if (s.yhat[i] != s.y[i]) ++wrong;
        }
      }
      rate[a] = static_cast<double>(wrong) / static_cast<double>(total);
    }
    d += std::fabs(rate[0] - rate[1]);
  }
  return d;
}

}  // namespace

TEST(DeltaEo, PerfectPredictionsGiveZero) {
  Sample s{{0, 1, 0, 1}, {0, 1, 0, 1}, {0, 0, 1, 1}};
  EXPECT_DOUBLE_EQ(fair::delta_eo(s.yhat, s.y, s.a), 0.0);
}

TEST(DeltaEo, WorkedExampleFromCellCounts) {
  // Cells (total, errors): a=0,y=0: (10,1); a=0,y=1: (10,2);
  //                        a=1,y=0: (10,3); a=1,y=1: (5,1).
  Sample s;
  auto fill = [&](int a, int y, int total, int errors) {
    for (int i = 0; i < total; ++i) {
      s.a.push_back(a);
      s.y.push_back(y);
      s.yhat.push_back(i < errors ? 1 - y : y);
    }
  };
  fill(0, 0, 10, 1);
  fill(0, 1, 10, 2);
  fill(1, 0, 10, 3);
  fill(1, 1, 5, 1);
  EXPECT_NEAR(fair::delta_eo(s.yhat, s.y, s.a), 0.2, 1e-12);
}

TEST(DeltaEo, IdenticalRatesAcrossGroupsGiveZero) {
  Sample s;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y)
      for (int i = 0; i < 4; ++i) {
        s.a.push_back(a);
        s.y.push_back(y);
        s.yhat.push_back(i == 0 ? 1 - y : y);  // 25% error in every cell
      }
  EXPECT_DOUBLE_EQ(fair::delta_eo(s.yhat, s.y, s.a), 0.0);
}

TEST(DeltaEo, EmptyCellNamesTheCell) {
  Sample s{{0, 1, 0}, {0, 1, 0}, {0, 0, 1}};  // no (a=1, y=1) samples
  try {
    fair::delta_eo(s.yhat, s.y, s.a);
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("a=1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("y=1"), std::string::npos);
  }
}

TEST(DeltaEo, MatchesBruteForceOnRandomInputs) {
  std::mt19937_64 rng(3);
  int done = 0;
  while (done < 10000) {
    Sample s = random_sample(rng, 30);
    if (!all_cells_nonempty(s)) continue;
    ++done;
    const double d = fair::delta_eo(s.yhat, s.y, s.a);
    EXPECT_DOUBLE_EQ(d, delta_eo_brute(s));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(DeltaEo, InvariantUnderPermutationAndGroupSwap) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    Sample s = random_sample(rng, 40);
    if (!all_cells_nonempty(s)) continue;
    const double base = fair::delta_eo(s.yhat, s.y, s.a);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 2.0);

    std::vector<std::size_t> perm(s.y.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    Sample p;
    for (std::size_t i : perm) {
      p.yhat.push_back(s.yhat[i]);
      p.y.push_back(s.y[i]);
      p.a.push_back(s.a[i]);
    }
    EXPECT_DOUBLE_EQ(fair::delta_eo(p.yhat, p.y, p.a), base);

    Sample flipped = s;
    for (int& a : flipped.a) a = 1 - a;
    EXPECT_DOUBLE_EQ(fair::delta_eo(flipped.yhat, flipped.y, flipped.a), base);
  }
}

TEST(DeltaDp, DirectRates) {
  // Group 0: 3/5 positive; group 1: 1/4 positive -> 0.6 - 0.25 = 0.35.
  Sample s;
  s.yhat = {1, 1, 1, 0, 0, 1, 0, 0, 0};
  s.a = {0, 0, 0, 0, 0, 1, 1, 1, 1};
  EXPECT_NEAR(fair::delta_dp(s.yhat, s.a), 0.35, 1e-12);
}

TEST(DeltaDp, AllPositiveAndSymmetricCases) {
  std::vector<int> all_pos{1, 1, 1, 1};
  std::vector<int> groups{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(fair::delta_dp(all_pos, groups), 0.0);

  std::vector<int> sym{1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(fair::delta_dp(sym, groups), 0.0);
}

TEST(DeltaDp, EmptyGroupRejectedAndRangeHolds) {
  std::vector<int> yhat{1, 0};
  std::vector<int> a{0, 0};
  EXPECT_THROW(fair::delta_dp(yhat, a), Error);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10000; ++trial) {
    Sample s = random_sample(rng, 20);
    bool has[2] = {false, false};
    for (int g : s.a) has[g] = true;
    if (!has[0] || !has[1]) continue;
    const double d = fair::delta_dp(s.yhat, s.a);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);

    Sample flipped = s;
    for (int& g : flipped.a) g = 1 - g;
    EXPECT_DOUBLE_EQ(fair::delta_dp(flipped.yhat, flipped.a), d);
  }
}

TEST(Accuracy, CountsAndPermutationInvariance) {
  std::vector<int> y{0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(fair::accuracy(y, y), 1.0);

  std::vector<int> yhat{0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(fair::accuracy(yhat, y), 0.75);

  std::vector<int> yhat_perm{1, 1, 1, 0};
  std::vector<int> y_perm{0, 1, 1, 0};
  // permuted jointly: (0,0),(1,1),(1,1),(1,0) -> same count of matches
  EXPECT_DOUBLE_EQ(fair::accuracy(yhat_perm, y_perm), 0.75);
}
