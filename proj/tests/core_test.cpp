#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "calibkit/core.hpp"
#include "calibkit/model.hpp"
#include "oracles.hpp"

using namespace calibkit;

namespace {

void expect_kind(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(Softmax, UniformOnEqualLogits) {
  const std::vector<double> z{0, 0, 0, 0};
  for (double p : softmax(z)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Softmax, SingleEntryIsOne) {
  const std::vector<double> z{3.7};
  EXPECT_EQ(softmax(z), std::vector<double>{1.0});
}

TEST(Softmax, MatchesExtendedPrecision) {
  const std::vector<double> z{1, 2, 3};
  const auto p = softmax(z);
  const auto ref = oracle::softmax(z);
  const double expected[] = {0.09003057, 0.24472847, 0.66524096};
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(p[k], static_cast<double>(ref[k]), 1e-16);
    EXPECT_NEAR(p[k], expected[k], 5e-9);
  }
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const std::vector<double> z{800, 790, -800};
  const auto p = softmax(z);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-10.0)), 1e-15);
  EXPECT_EQ(p[2], 0.0);
  const auto lp = log_softmax(z);
  EXPECT_NEAR(lp[2], -1600.0 - std::log1p(std::exp(-10.0)), 1e-9);
}

TEST(Softmax, ShiftInvariance) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> value(-20, 20), shift(-50, 50);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(1 + trial % 9);
    for (auto& v : z) v = value(rng);
    const double c = shift(rng);
    std::vector<double> moved = z;
    for (auto& v : moved) v += c;
    const auto a = softmax(z), b = softmax(moved);
    for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
}

TEST(Softmax, RejectsNonFinite) {
  const std::vector<double> z{0.0, std::numeric_limits<double>::quiet_NaN()};
  expect_kind(ErrorKind::invalid_input, [&] { softmax(z); });
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax_tiebreak(std::vector<double>{0.5, 0.5}), 0);
  EXPECT_EQ(argmax_tiebreak(std::vector<double>{0.1, 0.7, 0.2}), 1);
  EXPECT_EQ(argmax_tiebreak(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}), 0);
  EXPECT_EQ(argmax_tiebreak(std::vector<double>{0.2, 0.4, 0.4}), 1);
}

TEST(LogitDataset, RejectsInvalidInput) {
  expect_kind(ErrorKind::config, [] { LogitDataset(1, {0.0}, {0}); });
  expect_kind(ErrorKind::config, [] { LogitDataset(2, {0.0, 1.0, 2.0}, {0}); });
  expect_kind(ErrorKind::invalid_input, [] { LogitDataset(2, {0.0, 1.0}, {2}); });
  expect_kind(ErrorKind::invalid_input, [] { LogitDataset(2, {0.0, 1.0}, {-1}); });
  expect_kind(ErrorKind::invalid_input,
              [] { LogitDataset(2, {0.0, std::numeric_limits<double>::infinity()}, {0}); });
}

TEST(LogitDataset, SubsetAndScaled) {
  const auto data = LogitDataset::from_rows(3, {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}, {0, 1, 2});
  const std::vector<std::size_t> idx{2, 0};
  const auto sub = data.subset(idx);
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.logits(0)[0], 7.0);
  EXPECT_EQ(sub.label(1), 0);
  const auto doubled = data.scaled(2.0);
  EXPECT_EQ(doubled.logits(1)[2], 12.0);
  EXPECT_EQ(doubled.label(2), 2);
}

TEST(Predict, IdentityOnTwoClassRecord) {
  const auto data = LogitDataset::from_rows(2, {{2, 0}}, {0});
  const auto preds = predict(data, IdentityModel{});
  EXPECT_EQ(preds.predicted(0), 0);
  EXPECT_NEAR(preds.confidence(0), 1.0L / (1.0L + std::exp(-2.0L)), 1e-15);
  EXPECT_NEAR(preds.confidence(0), 0.8808, 1e-4);
  EXPECT_TRUE(preds.correct(0));
}

TEST(Predict, UnitTemperatureIsIdentityBitForBit) {
  const auto data = oracle::random_logits(7, 2000, 12.0, 3);
  EXPECT_TRUE(predict(data, TemperatureModel{1.0}) == predict(data, IdentityModel{}));
}

TEST(Predict, LargeTemperatureDrivesConfidenceToOne) {
  const auto data = LogitDataset::from_rows(3, {{0.1, 0.3, 0.2}, {-1, 2, 1.5}}, {1, 2});
  double previous = 0.0;
  for (double alpha : {1.0, 10.0, 100.0, 1000.0}) {
    const auto preds = predict(data, TemperatureModel{alpha});
    EXPECT_GT(preds.confidence(0), previous);
    previous = preds.confidence(0);
  }
  EXPECT_GT(predict(data, TemperatureModel{1e4}).confidence(0), 1.0 - 1e-12);
  EXPECT_GT(predict(data, TemperatureModel{1e4}).confidence(1), 1.0 - 1e-12);
}

TEST(Predict, InvariantsOnRandomData) {
  const auto data = oracle::random_logits(5, 3000, 6.0, 11);
  const auto preds = predict(data, TemperatureModel{0.7});
  std::size_t raw_hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto p = preds.probs(i);
    long double sum = 0.0L;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
      sum += v;
    }
    EXPECT_NEAR(static_cast<double>(sum), 1.0, 1e-9);
    EXPECT_GE(preds.confidence(i), 1.0 / 5);
    EXPECT_EQ(preds.confidence(i), p[static_cast<std::size_t>(preds.predicted(i))]);
    const auto z = data.logits(i);
    raw_hits += argmax_tiebreak(z) == data.label(i) ? 1 : 0;
  }
  const auto identity = predict(data, IdentityModel{});
  EXPECT_DOUBLE_EQ(identity.accuracy(), static_cast<double>(raw_hits) / data.size());
}

TEST(Predict, Deterministic) {
  const auto data = oracle::random_logits(4, 1000, 5.0, 5);
  const CalibrationModel model = ClassWiseTemperatureModel{1.0, {0.5, 1.5, 2.0, 0.9}, 2.0};
  EXPECT_TRUE(predict(data, model) == predict(data, model));
}

TEST(Predict, ClassWiseRoutesByUncalibratedPrediction) {
  const auto data = LogitDataset::from_rows(2, {{3, 1}, {0, 2}}, {0, 1});
  const auto preds = predict(data, ClassWiseTemperatureModel{1.0, {0.5, 2.0}, 5.0});
  const std::vector<double> first{1.5, 0.5}, second{0.0, 4.0};
  EXPECT_DOUBLE_EQ(preds.probs(0)[0], softmax(first)[0]);
  EXPECT_DOUBLE_EQ(preds.probs(1)[1], softmax(second)[1]);
}

TEST(Model, ApplyCollapses) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> value(-8, 8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(4);
    for (auto& v : z) v = value(rng);
    const int yhat = predicted_class(z);
    EXPECT_EQ(apply(TemperatureModel{1.0}, z, yhat), softmax(z));
    EXPECT_EQ(apply(VectorScalingModel{{1, 1, 1, 1}, {0, 0, 0, 0}}, z, yhat), softmax(z));
    const double alpha = 0.3 + trial * 0.01;
    EXPECT_EQ(apply(ClassWiseTemperatureModel{alpha, std::vector<double>(4, alpha), 0.0}, z, yhat),
              apply(TemperatureModel{alpha}, z, yhat));
  }
}

TEST(Model, ValidateRejectsBadParameters) {
  expect_kind(ErrorKind::invalid_model, [] { validate(TemperatureModel{0.0}, 3); });
  expect_kind(ErrorKind::invalid_model, [] { validate(TemperatureModel{-1.0}, 3); });
  expect_kind(ErrorKind::invalid_model, [] { validate(ClassWiseTemperatureModel{1.0, {1.0, 1.6}, 0.5}, 2); });
  expect_kind(ErrorKind::config, [] { validate(ClassWiseTemperatureModel{1.0, {1.0}, 0.5}, 2); });
  expect_kind(ErrorKind::config, [] { validate(VectorScalingModel{{1.0}, {0.0, 0.0}}, 2); });
  EXPECT_NO_THROW(validate(ClassWiseTemperatureModel{1.0, {0.5, 1.5}, 0.5}, 2));
}

TEST(Split, GroupsByPrediction) {
  const std::vector<int> predicted{0, 1, 0};
  const auto slices = split_by_predicted(predicted, 2);
  ASSERT_EQ(slices.size(), 2u);
  EXPECT_EQ(slices[0].indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(slices[1].indices, (std::vector<std::size_t>{1}));
}

TEST(Split, DegeneratePartition) {
  const std::vector<int> predicted(6, 3);
  const auto slices = split_by_predicted(predicted, 5);
  for (const auto& s : slices) {
    EXPECT_EQ(s.indices.size(), s.cls == 3 ? 6u : 0u);
  }
}

TEST(Split, PartitionProperty) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + trial % 9;
    const auto data = oracle::random_logits(k, 1000, 4.0, rng());
    const auto preds = predict(data, IdentityModel{});
    const auto slices = split_by_predicted(preds);
    std::vector<int> seen(data.size(), 0);
    std::size_t total = 0;
    for (const auto& s : slices) {
      total += s.indices.size();
      for (std::size_t i : s.indices) {
        ++seen[i];
        EXPECT_EQ(preds.predicted(i), s.cls);
      }
    }
    EXPECT_EQ(total, 1000u);
    for (int c : seen) EXPECT_EQ(c, 1);
  }
}

TEST(PredictionSet, RejectsUnnormalizedProbabilities) {
  expect_kind(ErrorKind::invalid_input, [] { PredictionSet::from_probabilities(2, {0.6, 0.5}, {0}); });
  expect_kind(ErrorKind::invalid_input, [] { PredictionSet::from_probabilities(2, {0.5, 0.5}, {3}); });
}
