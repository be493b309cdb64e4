#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "calibkit/metrics.hpp"
#include "oracles.hpp"

using namespace calibkit;

namespace {

PredictionSet binary_confidences(const std::vector<double>& confidence, const std::vector<bool>& correct) {
  std::vector<double> probs;
  std::vector<int> labels;
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    probs.push_back(confidence[i]);
    probs.push_back(1.0 - confidence[i]);
    labels.push_back(correct[i] ? 0 : 1);
  }
  return PredictionSet::from_probabilities(2, std::move(probs), std::move(labels));
}

}  // namespace

TEST(Binning, RightClosedEdges) {
  const BinningConfig m10(10);
  EXPECT_EQ(m10.bin_of(0.0), 0);
  EXPECT_EQ(m10.bin_of(0.1), 0);
  EXPECT_EQ(m10.bin_of(std::nextafter(0.1, 1.0)), 1);
  EXPECT_EQ(m10.bin_of(0.55), 5);
  EXPECT_EQ(m10.bin_of(0.6), 5);
  EXPECT_EQ(m10.bin_of(1.0), 9);
  for (int m : {1, 3, 7, 15, 100}) {
    const BinningConfig cfg(m);
    for (int b = 0; b < m; ++b) {
      EXPECT_EQ(cfg.bin_of(cfg.upper(b)), b) << "M=" << m << " b=" << b;
      if (b > 0) {
        EXPECT_EQ(cfg.bin_of(std::nextafter(cfg.lower(b), 2.0)), b);
      }
    }
  }
  EXPECT_THROW(BinningConfig(0), Error);
}

TEST(BinStats, ConfidenceOneLandsInLastBin) {
  const auto preds = binary_confidences({1.0}, {true});
  const auto stats = bin_stats(preds, BinningConfig(10));
  for (int b = 0; b < 9; ++b) EXPECT_EQ(stats.bins[b].count, 0u);
  EXPECT_EQ(stats.bins[9].count, 1u);
  EXPECT_EQ(stats.bins[9].mean_confidence, 1.0);
  EXPECT_EQ(stats.bins[9].mean_accuracy, 1.0);
}

TEST(BinStats, DirectAveraging) {
  const auto preds = binary_confidences({0.55, 0.58}, {true, true});
  const auto stats = bin_stats(preds, BinningConfig(10));
  EXPECT_EQ(stats.bins[5].count, 2u);
  EXPECT_NEAR(stats.bins[5].mean_confidence, 0.565, 1e-15);
  EXPECT_EQ(stats.bins[5].mean_accuracy, 1.0);
}

TEST(BinStats, CountsAndPermutationInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> conf(0.5, 1.0);
  std::bernoulli_distribution hit(0.7);
  std::vector<double> c(10000);
  std::vector<bool> ok(10000);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = conf(rng);
    ok[i] = hit(rng);
  }
  const auto stats = bin_stats(binary_confidences(c, ok), BinningConfig(15));
  std::size_t total = 0;
  for (const auto& b : stats.bins) total += b.count;
  EXPECT_EQ(total, 10000u);

  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> c2;
  std::vector<bool> ok2;
  for (std::size_t i : order) {
    c2.push_back(c[i]);
    ok2.push_back(ok[i]);
  }
  const auto shuffled = bin_stats(binary_confidences(c2, ok2), BinningConfig(15));
  for (std::size_t b = 0; b < stats.bins.size(); ++b) {
    EXPECT_EQ(stats.bins[b].count, shuffled.bins[b].count);
    EXPECT_NEAR(stats.bins[b].mean_confidence, shuffled.bins[b].mean_confidence, 1e-12);
    EXPECT_NEAR(stats.bins[b].mean_accuracy, shuffled.bins[b].mean_accuracy, 1e-12);
  }
}

TEST(Ece, MatchesIndependentRecomputation) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = oracle::random_logits(2 + trial % 8, 2000, 3.0 + trial, rng());
    const auto preds = predict(data, IdentityModel{});
    std::vector<double> c(preds.size());
    std::vector<bool> ok(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      c[i] = preds.confidence(i);
      ok[i] = preds.correct(i);
    }
    for (int m : {1, 10, 15}) {
      const double e = ece(bin_stats(preds, BinningConfig(m)));
      EXPECT_NEAR(e, static_cast<double>(oracle::ece(c, ok, m)), 1e-12);
      EXPECT_GE(e, 0.0);
      EXPECT_LE(e, 1.0);
    }
  }
}

TEST(Ece, ZeroWhenPerfectlyCalibrated) {
  // 0.75 confidence with 3 of 4 correct, 0.95 with 19 of 20 correct.
  std::vector<double> c;
  std::vector<bool> ok;
  for (int i = 0; i < 4; ++i) c.push_back(0.75), ok.push_back(i < 3);
  for (int i = 0; i < 20; ++i) c.push_back(0.95), ok.push_back(i < 19);
  EXPECT_NEAR(ece(bin_stats(binary_confidences(c, ok), BinningConfig(10))), 0.0, 1e-15);
  EXPECT_THROW(ece(BinnedStats{BinningConfig(10), std::vector<BinStat>(10), 0}), Error);
}

TEST(WorkedExample, TemperatureVariant) {
  const auto preds = oracle::merged_bin_example(false);
  const BinningConfig one(1);
  const auto stats = bin_stats(preds, one);
  EXPECT_NEAR(stats.bins[0].mean_confidence, 0.5, 1e-12);
  EXPECT_NEAR(stats.bins[0].mean_accuracy, 0.5, 1e-12);
  EXPECT_NEAR(ece(stats), 0.0, 1e-12);
  const auto slices = split_by_predicted(preds);
  const auto eces = class_ece(preds, slices, one);
  EXPECT_NEAR(*eces[0], 0.08, 1e-12);
  EXPECT_NEAR(*eces[1], 0.08, 1e-12);
  EXPECT_FALSE(eces[2].has_value());
  EXPECT_NEAR(max_ece(eces), 0.08, 1e-12);
  EXPECT_NEAR(avg_ece(eces), 0.08, 1e-12);
}

TEST(WorkedExample, ClassWiseVariant) {
  const auto preds = oracle::merged_bin_example(true);
  const BinningConfig one(1);
  const auto stats = bin_stats(preds, one);
  EXPECT_NEAR(stats.bins[0].mean_confidence, 0.52, 1e-12);
  EXPECT_NEAR(stats.bins[0].mean_accuracy, 0.5, 1e-12);
  EXPECT_NEAR(ece(stats), 0.02, 1e-12);
  const auto eces = class_ece(preds, split_by_predicted(preds), one);
  EXPECT_NEAR(*eces[0], 0.02, 1e-12);
  EXPECT_NEAR(*eces[1], 0.02, 1e-12);
  EXPECT_NEAR(max_ece(eces), 0.02, 1e-12);
}

TEST(WorkedExample, ReliabilityRow) {
  const auto rows = reliability_rows(bin_stats(oracle::merged_bin_example(false), BinningConfig(1)));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].count, 200u);
  EXPECT_NEAR(*rows[0].mean_confidence, 0.5, 1e-12);
  EXPECT_NEAR(*rows[0].mean_accuracy, 0.5, 1e-12);
}

TEST(ClassEce, SingleSliceEqualsGlobal) {
  // Every record predicts class 2.
  const auto data = LogitDataset::from_rows(3, {{0, 0, 3}, {1, 0, 2}, {0, 1, 1.5}, {-1, 0, 4}}, {2, 0, 2, 1});
  const auto preds = predict(data, IdentityModel{});
  for (int m : {1, 5, 15}) {
    const auto eces = class_ece(preds, split_by_predicted(preds), BinningConfig(m));
    EXPECT_NEAR(*eces[2], ece(bin_stats(preds, BinningConfig(m))), 1e-15);
  }
}

TEST(ClassEce, MaxAndAverageAgainstRecomputation) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto data = oracle::random_logits(10, 3000, 5.0, rng());
    const auto preds = predict(data, IdentityModel{});
    const auto slices = split_by_predicted(preds);
    const auto eces = class_ece(preds, slices);
    double worst = 0.0, sum = 0.0;
    int present = 0;
    for (const auto& s : slices) {
      if (s.indices.empty()) continue;
      std::vector<double> c;
      std::vector<bool> ok;
      for (std::size_t i : s.indices) {
        c.push_back(preds.confidence(i));
        ok.push_back(preds.correct(i));
      }
      const double e = static_cast<double>(oracle::ece(c, ok, 15));
      worst = std::max(worst, e);
      sum += e;
      ++present;
    }
    EXPECT_NEAR(max_ece(eces), worst, 1e-12);
    EXPECT_NEAR(avg_ece(eces), sum / present, 1e-12);
    EXPECT_GE(max_ece(eces), avg_ece(eces));
    EXPECT_GE(avg_ece(eces), 0.0);
  }
}

TEST(ClassEce, Aggregates) {
  const std::vector<std::optional<double>> equal{0.02, 0.02}, mixed{0.0, 0.04}, eight{0.08, 0.08};
  EXPECT_DOUBLE_EQ(max_ece(equal), 0.02);
  EXPECT_DOUBLE_EQ(avg_ece(mixed), 0.02);
  EXPECT_DOUBLE_EQ(avg_ece(eight), 0.08);
  const std::vector<std::optional<double>> gaps{std::nullopt, 0.1, std::nullopt, 0.3};
  EXPECT_DOUBLE_EQ(max_ece(gaps), 0.3);
  EXPECT_DOUBLE_EQ(avg_ece(gaps), 0.2);
  const std::vector<std::optional<double>> none{std::nullopt};
  EXPECT_THROW(max_ece(none), Error);
  EXPECT_THROW(avg_ece(none), Error);
}

TEST(Nll, Examples) {
  EXPECT_NEAR(nll(LogitDataset::from_rows(4, {{0, 0, 0, 0}, {1, 1, 1, 1}}, {0, 3}), IdentityModel{}),
              std::log(4.0), 1e-15);
  EXPECT_NEAR(nll(PredictionSet::from_probabilities(3, {1, 0, 0, 0, 1, 0}, {0, 1})), 0.0, 0.0);
  EXPECT_NEAR(nll(LogitDataset::from_rows(2, {{2, 0}}, {0}), IdentityModel{}),
              static_cast<double>(std::log1p(std::exp(-2.0L))), 1e-15);
  EXPECT_NEAR(nll(LogitDataset::from_rows(2, {{2, 0}}, {0}), IdentityModel{}), 0.126928, 1e-6);
}

TEST(Nll, StaysFiniteOnExtremeLogits) {
  const auto data = LogitDataset::from_rows(2, {{1e6, -1e6}}, {1});
  const double v = nll(data, IdentityModel{});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_EQ(v, 700.0);
}

TEST(Reliability, RowsPerBin) {
  const auto data = oracle::random_logits(4, 5000, 4.0, 13);
  const auto rows = reliability_rows(bin_stats(predict(data, IdentityModel{}), BinningConfig(10)));
  ASSERT_EQ(rows.size(), 10u);
  std::size_t total = 0;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    total += rows[b].count;
    EXPECT_NEAR(rows[b].bin_low, b / 10.0, 1e-15);
    EXPECT_NEAR(rows[b].bin_high, (b + 1) / 10.0, 1e-15);
    EXPECT_EQ(rows[b].mean_confidence.has_value(), rows[b].count > 0);
  }
  EXPECT_EQ(total, 5000u);
  // Confidence >= 1/4 keeps the lowest two bins empty.
  EXPECT_EQ(rows[0].count, 0u);
  EXPECT_FALSE(rows[0].mean_accuracy.has_value());
}

TEST(Evaluate, WarnsOnNeverPredictedClasses) {
  const auto data = LogitDataset::from_rows(3, {{3, 0, 0}, {2, 1, 0}, {0, 4, 0}}, {0, 1, 1});
  const auto report = evaluate(predict(data, IdentityModel{}));
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("class 2"), std::string::npos);
  EXPECT_EQ(report.per_class[2].count, 0u);
  EXPECT_FALSE(report.per_class[2].ece.has_value());
  EXPECT_DOUBLE_EQ(report.accuracy, 2.0 / 3.0);
}
