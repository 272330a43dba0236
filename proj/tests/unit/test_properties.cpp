#include <gtest/gtest.h>

#include "properties.hpp"

namespace gbtrack::testing {
namespace {

void expect_holds(const PropertyResult& r) {
  EXPECT_GE(r.cases, kPropertyCases) << r.name;
  EXPECT_EQ(r.failures, 0u) << r.name << ": " << r.first_failure;
}

TEST(Invariants, ParticleCountConstancy) { expect_holds(particle_count_constancy()); }
TEST(Invariants, WeightNormalization) { expect_holds(weight_normalization()); }
TEST(Invariants, ResampleUniformity) { expect_holds(resample_uniformity()); }
TEST(Invariants, EstimateContainment) { expect_holds(estimate_containment()); }
TEST(Invariants, KalmanCovarianceSymmetry) { expect_holds(kf_symmetry()); }
TEST(Invariants, ErrorDecomposition) { expect_holds(error_decomposition()); }
TEST(Invariants, RocMonotonicity) { expect_holds(roc_monotonicity()); }

}  // namespace
}  // namespace gbtrack::testing
