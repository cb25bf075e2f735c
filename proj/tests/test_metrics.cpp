// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "actionpose/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace actionpose;
using test_util::random_matrix;

namespace {

Eigen::Matrix3d random_rotation(Rng& rng) {
  return oracles::euler_rotation(rng.uniform(-3.0, 3.0), rng.uniform(-1.5, 1.5),
                                 rng.uniform(-3.0, 3.0));
}

}  // namespace

TEST_CASE("mpjpe closed-form cases") {
  Rng rng(1);
  const Eigen::MatrixXd gt = random_matrix(rng, 17 * 4, 3, 100.0);

  SUBCASE("identity gives zero") { CHECK(mpjpe(gt, gt) == 0.0); }

  SUBCASE("uniform (3,4,0) offset gives exactly 5") {
    Eigen::MatrixXd pred = gt;
    pred.rowwise() += Eigen::RowVector3d(3.0, 4.0, 0.0);
    CHECK(mpjpe(pred, gt) == doctest::Approx(5.0).epsilon(1e-12));
  }

  SUBCASE("flat mean equals frames-then-joints mean") {
    const Eigen::MatrixXd pred = gt + random_matrix(rng, gt.rows(), 3, 5.0);
    double by_frame = 0.0;
    for (int t = 0; t < 4; ++t) {
      by_frame += (pred.middleRows(t * 17, 17) - gt.middleRows(t * 17, 17))
                      .rowwise()
                      .norm()
                      .mean();
    }
    CHECK(mpjpe(pred, gt) == doctest::Approx(by_frame / 4.0).epsilon(1e-12));
  }

  SUBCASE("shape mismatch rejected") {
    CHECK_THROWS_AS(mpjpe(gt, gt.topRows(17)), ValidationError);
  }
}

TEST_CASE("mpjpe is a metric on random triples") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd a = random_matrix(rng, 12, 3, 10.0);
    const Eigen::MatrixXd b = random_matrix(rng, 12, 3, 10.0);
    const Eigen::MatrixXd c = random_matrix(rng, 12, 3, 10.0);
    CHECK(mpjpe(a, b) == doctest::Approx(mpjpe(b, a)).epsilon(1e-12));
    CHECK(mpjpe(a, a) == 0.0);
    CHECK(mpjpe(a, b) > 0.0);
    CHECK(mpjpe(a, c) <= mpjpe(a, b) + mpjpe(b, c) + 1e-9);
  }
}

TEST_CASE("procrustes recovers similarity transforms exactly") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int frames = 3, joints = 17;
    const Eigen::MatrixXd gt = random_matrix(rng, frames * joints, 3, 100.0);
    const Eigen::Matrix3d rot = random_rotation(rng);
    Eigen::MatrixXd pred(frames * joints, 3);
    for (Eigen::Index r = 0; r < pred.rows(); ++r) {
      pred.row(r) = 1.3 * (rot * gt.row(r).transpose()).transpose() +
                    Eigen::RowVector3d(20.0, -7.0, 3.0);
    }
    CHECK(p_mpjpe(pred, gt, frames, joints) < 1e-6);
  }
}

TEST_CASE("p_mpjpe <= mpjpe on 1000 random pairs") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::MatrixXd gt = random_matrix(rng, 17, 3, 50.0);
    const Eigen::MatrixXd pred = gt + random_matrix(rng, 17, 3, 20.0);
    CHECK(p_mpjpe(pred, gt, 1, 17) <= mpjpe(pred, gt) + 1e-9);
  }
}

TEST_CASE("p_mpjpe is invariant to similarity transforms of the prediction") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd gt = random_matrix(rng, 17, 3, 80.0);
    const Eigen::MatrixXd pred = gt + random_matrix(rng, 17, 3, 15.0);
    const Eigen::Matrix3d rot = random_rotation(rng);
    const double scale = rng.uniform(0.5, 2.0);
    Eigen::MatrixXd moved(17, 3);
    for (int r = 0; r < 17; ++r) {
      moved.row(r) =
          scale * (rot * pred.row(r).transpose()).transpose() + Eigen::RowVector3d(5, 6, 7);
    }
    CHECK(p_mpjpe(moved, gt, 1, 17) ==
          doctest::Approx(p_mpjpe(pred, gt, 1, 17)).epsilon(1e-6));
  }
}

TEST_CASE("small-instance oracle: p_mpjpe matches brute-force search within 1e-3 mm") {
  Rng rng(6);
  for (int trial = 0; trial < 15; ++trial) {
    const Eigen::MatrixXd gt = random_matrix(rng, 3, 3, 60.0);
    const Eigen::MatrixXd pred = gt + random_matrix(rng, 3, 3, 25.0);
    const double ours = p_mpjpe(pred, gt, 1, 3);
    const auto oracle = oracles::brute_force_alignment(pred, gt, false);
    CHECK(std::abs(ours - oracle.mean_distance) < 1e-3);
  }
}

TEST_CASE("reflection is excluded: mirrored gt is not recovered, the reflecting oracle is") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd gt = random_matrix(rng, 17, 3, 80.0);
    Eigen::MatrixXd mirrored = gt;
    mirrored.col(2) = -mirrored.col(2);
    const double ours = p_mpjpe(mirrored, gt, 1, 17);
    const auto with_reflection = oracles::brute_force_alignment(mirrored, gt, true);
    CHECK(with_reflection.mean_distance < 1e-5);
    CHECK(ours > 1.0);  // generic frames stay far from zero without reflections
  }
}

TEST_CASE("collinear frames fall back to translation-only alignment and are flagged") {
  Eigen::MatrixXd gt(4, 3), pred(4, 3);
  for (int j = 0; j < 4; ++j) {
    gt.row(j) << j * 10.0, 0.0, 0.0;       // collinear ground truth
    pred.row(j) << j * 10.0, 5.0, 0.0;     // shifted copy
  }
  int degenerate = 0;
  const double err = p_mpjpe(pred, gt, 1, 4, &degenerate);
  CHECK(degenerate == 1);
  CHECK(err == doctest::Approx(0.0).epsilon(1e-9));  // translation removes the offset
}

TEST_CASE("pck closed-form cases") {
  Eigen::MatrixXd gt = Eigen::MatrixXd::Zero(17, 3);

  SUBCASE("all zero errors give 100 percent") { CHECK(pck(gt, gt) == 100.0); }

  SUBCASE("one joint at 200mm of 17 gives 16/17") {
    Eigen::MatrixXd pred = gt;
    pred.row(3) << 200.0, 0.0, 0.0;
    CHECK(pck(pred, gt) == doctest::Approx(100.0 * 16.0 / 17.0).epsilon(1e-12));
  }

  SUBCASE("monotone non-decreasing in the threshold") {
    Rng rng(8);
    const Eigen::MatrixXd pred = random_matrix(rng, 17, 3, 120.0);
    double prev = 0.0;
    for (double threshold = 0.0; threshold <= 300.0; threshold += 10.0) {
      const double now = pck(pred, gt, threshold);
      CHECK(now >= prev);
      prev = now;
    }
  }
}

TEST_CASE("auc closed-form cases") {
  Eigen::MatrixXd gt = Eigen::MatrixXd::Zero(17, 3);

  SUBCASE("all zero errors give 100 percent") { CHECK(auc(gt, gt) == 100.0); }

  SUBCASE("all joints at exactly 151mm give 0 percent") {
    Eigen::MatrixXd pred = gt;
    pred.col(0).setConstant(151.0);
    CHECK(auc(pred, gt) == 0.0);
    CHECK(pck(pred, gt) == 0.0);
  }

  SUBCASE("auc is at most pck at the largest threshold") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd pred = random_matrix(rng, 17, 3, 100.0);
      CHECK(auc(pred, gt) <= pck(pred, gt) + 1e-12);
    }
  }
}

TEST_CASE("eval report keys match the documented schema") {
  EvalReport report;
  report.mpjpe_mm = 1.0;
  report.p_mpjpe_mm = 0.5;
  report.pck_percent = 99.0;
  report.auc_percent = 88.0;
  report.per_clip.push_back({"3", "front", 1.0, 0.5, 99.0, 88.0});
  std::ostringstream kv;
  report.write_kv(kv);
  const std::string text = kv.str();
  for (const char* key :
       {"mpjpe_mm = ", "p_mpjpe_mm = ", "pck_percent = ", "auc_percent = ", "num_items = 1",
        "item.3.front.mpjpe_mm = ", "item.3.front.p_mpjpe_mm = ",
        "item.3.front.pck_percent = ", "item.3.front.auc_percent = "}) {
    CHECK(text.find(key) != std::string::npos);
  }
}
