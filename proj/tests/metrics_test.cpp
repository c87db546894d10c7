// Copyright 2026 The refvos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "refvos/metrics.hpp"

#include <algorithm>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace refvos::metrics {
namespace {

// Published leaderboard: J&F, J, F, N-acc, T-acc, Final.
struct LeaderboardEntry {
  const char* team;
  double jf, j, f, n_acc, t_acc, final;
};

constexpr LeaderboardEntry kLeaderboard[] = {
    {"HITsz_Dragon", 0.7897, 0.7680, 0.8115, 0.9615, 0.9759, 0.9091},
    {"goodx", 0.7106, 0.6880, 0.7332, 1.0000, 0.9652, 0.8919},
    {"Ours", 0.7130, 0.6882, 0.7378, 0.9615, 0.9893, 0.8879},
    {"junjie_zheng", 0.6837, 0.6633, 0.7040, 0.8846, 0.9679, 0.8454},
    {"rookie7777", 0.6420, 0.6145, 0.6695, 0.8462, 0.9679, 0.8187},
};

TEST(LeaderboardTest, JFAndFinalRecoveredForEveryRow) {
  for (const auto& row : kLeaderboard) {
    const VideoScore s{row.j, row.f};
    EXPECT_NEAR(s.jf(), row.jf, 5e-4) << row.team;
    EXPECT_NEAR(FinalScore(s.jf(), row.n_acc, row.t_acc), row.final, 5e-4) << row.team;
  }
}

TEST(LeaderboardTest, WorkedExamples) {
  EXPECT_NEAR((VideoScore{0.7680, 0.8115}.jf()), 0.78975, 1e-12);
  EXPECT_NEAR(FinalScore(0.7130, 0.9615, 0.9893), 0.88793333, 1e-6);
  EXPECT_NEAR(FinalScore(0.7106, 1.0000, 0.9652), 0.89193333, 1e-6);
  EXPECT_DOUBLE_EQ(FinalScore(1, 1, 1), 1.0);
}

TEST(LeaderboardTest, AggregatorRecoversOursRow) {
  EvalReport r;
  SetAggregates(r, 0.6882, 0.7378, 0.9615, 0.9893);
  EXPECT_EQ(LeaderboardRow(r),
            "J&F 0.7130 | J 0.6882 | F 0.7378 | N-acc 0.9615 | T-acc 0.9893 | Final 0.8879");
}

Mask Pixels(int h, int w, std::initializer_list<std::pair<int, int>> xy) {
  BitGrid g(h, w);
  for (auto [x, y] : xy) g.set(x, y);
  return Encode(g);
}

TEST(RegionJaccardTest, Examples) {
  const Mask m = BoxMask(6, 6, {1, 1, 4, 4});
  EXPECT_DOUBLE_EQ(RegionJaccard(m, m), 1.0);
  EXPECT_DOUBLE_EQ(RegionJaccard(Mask::Empty(6, 6), m), 0.0);
  EXPECT_DOUBLE_EQ(RegionJaccard(Pixels(2, 2, {{0, 0}}), Pixels(2, 2, {{0, 0}, {1, 0}})), 0.5);
  EXPECT_DOUBLE_EQ(RegionJaccard(Mask::Empty(6, 6), Mask::Empty(6, 6)), 1.0);
}

TEST(BoundaryFTest, Examples) {
  const Mask m = BoxMask(16, 16, {3, 4, 10, 12});
  EXPECT_DOUBLE_EQ(BoundaryF(m, m, 0), 1.0);
  EXPECT_DOUBLE_EQ(BoundaryF(BoxMask(16, 16, {0, 0, 3, 3}), BoxMask(16, 16, {10, 10, 14, 14}), 2), 0.0);
  EXPECT_DOUBLE_EQ(BoundaryF(Mask::Empty(4, 4), Mask::Empty(4, 4), 1), 1.0);
  EXPECT_DOUBLE_EQ(BoundaryF(Mask::Empty(4, 4), BoxMask(4, 4, {0, 0, 2, 2}), 1), 0.0);
  EXPECT_THROW(BoundaryF(m, m, -1), ContractError);
}

TEST(BoundaryFTest, OnePixelShiftWithToleranceOne) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 50; ++i) {
    const int x0 = 1 + static_cast<int>(rng() % 6), y0 = 1 + static_cast<int>(rng() % 6);
    const int x1 = x0 + 2 + static_cast<int>(rng() % 6), y1 = y0 + 2 + static_cast<int>(rng() % 6);
    const Mask gt = BoxMask(16, 16, {x0, y0, x1, y1});
    const int dx = static_cast<int>(rng() % 3) - 1, dy = static_cast<int>(rng() % 3) - 1;
    const Mask pred = BoxMask(16, 16, {x0 + dx, y0 + dy, x1 + dx, y1 + dy});
    const double want = oracle::BoundaryF(oracle::ToGrid(pred), oracle::ToGrid(gt), 1);
    EXPECT_DOUBLE_EQ(want, 1.0);
    EXPECT_DOUBLE_EQ(BoundaryF(pred, gt, 1), want);
  }
}

TEST(BoundaryFTest, MatchesAllPairsOracle) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    const int h = 1 + static_cast<int>(rng() % 24), w = 1 + static_cast<int>(rng() % 24);
    const auto a = oracle::RandomGrid(rng, h, w), b = oracle::RandomGrid(rng, h, w);
    const int tol = static_cast<int>(rng() % 4);
    ASSERT_DOUBLE_EQ(BoundaryF(oracle::FromGrid(a), oracle::FromGrid(b), tol),
                     oracle::BoundaryF(a, b, tol))
        << "pair " << i << " tol " << tol;
  }
}

TEST(BoundaryFTest, NonDecreasingInTolerance) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Mask a = oracle::RandomMask(rng, 20, 20), b = oracle::RandomMask(rng, 20, 20);
    double prev = BoundaryF(a, b, 0);
    for (int tol = 1; tol <= 6; ++tol) {
      const double cur = BoundaryF(a, b, tol);
      ASSERT_GE(cur, prev);
      ASSERT_LE(cur, 1.0);
      prev = cur;
    }
  }
}

TEST(DefaultToleranceTest, Values) {
  EXPECT_EQ(DefaultBoundaryTolerance(64, 64), 1);   // diag 90.5 -> 0.72
  EXPECT_EQ(DefaultBoundaryTolerance(480, 854), 8);  // diag 979.6 -> 7.84
  EXPECT_EQ(DefaultBoundaryTolerance(1, 1), 1);
}

TEST(VideoJFTest, PerfectAndMismatched) {
  Trajectory gt;
  for (int t = 0; t < 4; ++t) gt.masks.push_back(BoxMask(10, 10, {t, 1, t + 4, 6}));
  const VideoScore s = VideoJF(gt, gt);
  EXPECT_DOUBLE_EQ(s.j, 1.0);
  EXPECT_DOUBLE_EQ(s.f, 1.0);
  EXPECT_THROW(VideoJF(Trajectory::Zeros(3, 10, 10), gt), ContractError);
}

TEST(VideoJFTest, UniformFrameMean) {
  Trajectory gt, pred;
  gt.masks = {BoxMask(8, 8, {0, 0, 4, 4}), BoxMask(8, 8, {0, 0, 4, 4})};
  pred.masks = {BoxMask(8, 8, {0, 0, 4, 4}), BoxMask(8, 8, {0, 0, 4, 2})};
  const VideoScore s = VideoJF(pred, gt, 0);
  EXPECT_DOUBLE_EQ(s.j, (1.0 + 0.5) / 2.0);
  const double f1 = oracle::BoundaryF(oracle::ToGrid(pred.masks[1]), oracle::ToGrid(gt.masks[1]), 0);
  EXPECT_DOUBLE_EQ(s.f, (1.0 + f1) / 2.0);
}

TEST(PresenceTest, Examples) {
  const Trajectory empty = Trajectory::Zeros(3, 4, 4);
  Trajectory hit = empty;
  hit.masks[2] = BoxMask(4, 4, {0, 0, 1, 1});

  std::vector<PresenceCase> absent = {{false, &empty}, {false, &empty}};
  EXPECT_DOUBLE_EQ(PresenceAccuracies(absent).n_acc, 1.0);
  EXPECT_DOUBLE_EQ(PresenceAccuracies(absent).t_acc, 1.0);

  std::vector<PresenceCase> miss = {{true, &empty}};
  EXPECT_DOUBLE_EQ(PresenceAccuracies(miss).t_acc, 0.0);
  EXPECT_DOUBLE_EQ(PresenceAccuracies(miss).n_acc, 1.0);
}

TEST(PresenceTest, MatchesDirectCount) {
  std::mt19937_64 rng(31);
  std::vector<Trajectory> preds;
  std::vector<bool> present;
  for (int i = 0; i < 60; ++i) {
    Trajectory t = Trajectory::Zeros(5, 6, 6);
    if (rng() % 2) t.masks[rng() % 5] = BoxMask(6, 6, {1, 1, 3, 3});
    preds.push_back(t);
    present.push_back(rng() % 3 != 0);
  }
  std::vector<PresenceCase> cases;
  int absent_n = 0, absent_ok = 0, present_n = 0, present_ok = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    cases.push_back({present[i], &preds[i]});
    bool any = false;
    for (const auto& m : preds[i].masks) any = any || m.area() > 0;
    if (present[i]) {
      ++present_n;
      present_ok += any ? 1 : 0;
    } else {
      ++absent_n;
      absent_ok += any ? 0 : 1;
    }
  }
  const auto acc = PresenceAccuracies(cases);
  EXPECT_DOUBLE_EQ(acc.n_acc, static_cast<double>(absent_ok) / absent_n);
  EXPECT_DOUBLE_EQ(acc.t_acc, static_cast<double>(present_ok) / present_n);
}

TEST(ReportTest, AggregatesAreConsistentAndOrderIndependent) {
  std::vector<VideoRow> rows = {
      {"b", "q0", true, 0.5, 0.7}, {"a", "q1", false, 1.0, 1.0}, {"a", "q0", true, 0.25, 0.5}};
  const PresenceAccuracy acc{1.0, 0.5};
  const EvalReport r1 = BuildReport(rows, acc);
  std::reverse(rows.begin(), rows.end());
  const EvalReport r2 = BuildReport(rows, acc);
  EXPECT_EQ(ToJson(r1).dump(), ToJson(r2).dump());
  EXPECT_EQ(r1.per_video.front().video, "a");
  EXPECT_DOUBLE_EQ(r1.j, (0.5 + 1.0 + 0.25) / 3.0);
  EXPECT_DOUBLE_EQ(r1.f, (0.7 + 1.0 + 0.5) / 3.0);
  EXPECT_DOUBLE_EQ(r1.jf, (r1.j + r1.f) / 2.0);
  EXPECT_DOUBLE_EQ(r1.final, (r1.jf + 1.0 + 0.5) / 3.0);
  for (double v : {r1.j, r1.f, r1.jf, r1.n_acc, r1.t_acc, r1.final}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

}  // namespace
}  // namespace refvos::metrics
