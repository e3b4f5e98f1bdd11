#include <doctest.h>

#include <cmath>

#include "mgnet/errors.hpp"
#include "mgnet/metrics.hpp"
#include "properties.hpp"

using namespace mgnet;

TEST_SUITE("metrics") {
  TEST_CASE("worked AUC example") {
    const std::vector<int> labels{0, 0, 1, 1};
    const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
    CHECK(roc_auc(labels, scores) == 0.75);
  }

  TEST_CASE("AUC edge cases") {
    CHECK(roc_auc(std::vector<int>{0, 1}, std::vector<double>{0.2, 0.9}) == 1.0);
    CHECK(roc_auc(std::vector<int>{0, 1}, std::vector<double>{0.9, 0.2}) == 0.0);
    CHECK(roc_auc(std::vector<int>{0, 1, 0, 1}, std::vector<double>{0.5, 0.5, 0.5, 0.5}) == 0.5);
    CHECK_THROWS_AS(roc_auc(std::vector<int>{1, 1}, std::vector<double>{0.1, 0.2}), ArgumentError);
    CHECK_THROWS_AS(roc_auc(std::vector<int>{0, 1}, std::vector<double>{0.1, NAN}),
                    ArgumentError);
    CHECK_THROWS_AS(roc_auc(std::vector<int>{0, 1}, std::vector<double>{0.1}), ArgumentError);
  }

  TEST_CASE("sweep AUC equals the all-pairs statistic") {
    Rng rng(71);
    for (int trial = 0; trial < 300; ++trial) {
      const props::AucInstance inst = props::random_auc_instance(rng);
      CHECK(std::abs(roc_auc(inst.labels, inst.scores) -
                     props::brute_force_auc(inst.labels, inst.scores)) <= 1e-12);
    }
  }

  TEST_CASE("confusion counts and derived rates") {
    const std::vector<int> labels{1, 1, 1, 0, 0, 0, 0};
    const std::vector<int> preds{1, 0, 1, 0, 1, 0, 0};
    const std::vector<double> scores{0.9, 0.2, 0.8, 0.1, 0.7, 0.3, 0.4};
    const Confusion c = confusion(labels, preds);
    CHECK(c.tp == 2);
    CHECK(c.fn == 1);
    CHECK(c.tn == 3);
    CHECK(c.fp == 1);
    const EvalMetrics m = compute_metrics(labels, preds, scores);
    CHECK(m.accuracy == doctest::Approx(5.0 / 7.0));
    CHECK(m.sensitivity == doctest::Approx(2.0 / 3.0));
    CHECK(m.specificity == doctest::Approx(0.75));
    CHECK(format_metrics_block(m) ==
          "accuracy=0.714286\nauc=0.750000\nsensitivity=0.666667\nspecificity=0.750000\n"
          "tp=2\ntn=3\nfp=1\nfn=1\n");
  }

  TEST_CASE("metrics need both classes") {
    const std::vector<int> labels{0, 0};
    const std::vector<int> preds{0, 1};
    const std::vector<double> scores{0.1, 0.9};
    CHECK_THROWS_AS(compute_metrics(labels, preds, scores), ArgumentError);
    CHECK_THROWS_AS(confusion(std::vector<int>{0, 2}, std::vector<int>{0, 1}), ArgumentError);
    CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}), ArgumentError);
  }
}
