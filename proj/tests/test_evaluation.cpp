#include <doctest.h>

#include "s2no/evaluation/metrics.hpp"
#include "test_support.hpp"

using namespace s2no;
using namespace s2no::evaluation;

TEST_CASE("sample metrics are zero for a perfect prediction and scale as expected") {
  Mat ref(2, 3);
  ref << 3.0, 0.0, 0.0, 0.0, 4.0, 0.0;
  const SampleMetrics exact = sample_metrics(ref, ref);
  CHECK(exact.l2_pct == 0.0);
  CHECK(exact.mae == 0.0);
  CHECK(exact.mmax == 0.0);

  Mat pred = ref;
  pred(0, 0) += 1.0;  // one point off by 1 mm along x
  const SampleMetrics m = sample_metrics(pred, ref);
  CHECK(m.l2_pct == doctest::Approx(100.0 / 5.0));  // ||ref||_F = 5
  CHECK(m.mae == doctest::Approx(1.0 / 6.0));
  CHECK(m.mmax == doctest::Approx(1.0));

  Mat wrong(3, 3);
  wrong.setZero();
  CHECK_THROWS_AS(sample_metrics(wrong, ref), Error);
  CHECK_THROWS_AS(sample_metrics(wrong, wrong), Error);  // zero-norm reference
}

TEST_CASE("max point error uses the Euclidean norm across components") {
  Mat ref = Mat::Zero(2, 3);
  ref(0, 0) = 1.0;  // keep the reference norm finite
  Mat pred = ref;
  pred(1, 0) = 3e-3;
  pred(1, 1) = 4e-3;
  const SampleMetrics m = sample_metrics(pred, ref);
  CHECK(m.mmax == doctest::Approx(5e-3));  // 3-4-5 triangle, not max |component|
}

TEST_CASE("report aggregates are arithmetic means of per-sample values") {
  oracle::Dataset ds;
  ds.geometry_id = "toy";
  ds.n = 2;
  ds.num_voxels = 2;
  for (int i = 0; i < 2; ++i) {
    oracle::Sample s;
    s.omega = {static_cast<std::uint8_t>(i), 1};
    s.a = Eigen::VectorXf::Zero(2);
    s.u.resize(2, 3);
    s.u << 1.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f;
    ds.samples.push_back(std::move(s));
  }
  Predictor shifted = [](const oracle::Sample& s) {
    Mat p = s.u.cast<double>();
    p(0, 2) += (s.omega[0] == 0) ? 0.1 : 0.3;  // per-sample max errors 0.1, 0.3
    return p;
  };
  const MetricReport rep = evaluate_predictor(ds, shifted, "s2no");
  CHECK(rep.samples() == 2);
  CHECK(rep.model_id == "s2no");
  CHECK(rep.dataset_id == "toy");
  REQUIRE(rep.per_sample.size() == 2);
  CHECK(rep.per_sample[0].mmax == doctest::Approx(0.1));
  CHECK(rep.per_sample[1].mmax == doctest::Approx(0.3));
  // M-Max aggregates by the mean over samples, not the max.
  CHECK(rep.mmax == doctest::Approx(0.2));
  CHECK(rep.mae == doctest::Approx((0.1 / 6 + 0.3 / 6) / 2));
  CHECK(rep.l2_pct ==
        doctest::Approx(100.0 * (0.1 / std::sqrt(2.0) + 0.3 / std::sqrt(2.0)) / 2));

  const std::string csv = report_csv(rep);
  CHECK(csv.substr(0, csv.find('\n')) == "sample,l2_pct,mae_mm,mmax_mm");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + one row per sample
  CHECK(csv.find("\n0,") != std::string::npos);
  CHECK(csv.find("\n1,") != std::string::npos);

  const std::string summary = report_summary(rep);
  CHECK(summary.find("s2no on toy") == 0);
  CHECK(summary.find("2 samples") != std::string::npos);
}

TEST_CASE("train/test leakage is detected by material layout") {
  oracle::Dataset train, test;
  oracle::Sample s1, s2;
  s1.omega = {0, 1, 1};
  s2.omega = {1, 1, 0};
  train.samples = {s1, s2};
  test.samples = {s2};
  CHECK_THROWS_WITH_AS(require_disjoint(train, test), doctest::Contains("shares"),
                       Error);
  oracle::Sample s3;
  s3.omega = {0, 0, 0};
  test.samples = {s3};
  CHECK_NOTHROW(require_disjoint(train, test));
}
