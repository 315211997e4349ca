// Copyright 2026 The svrpf Authors.
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

#include <gtest/gtest.h>

#include <svrpf/consistency.hpp>
#include <svrpf/validate.hpp>

#include <cmath>

namespace {

using svrpf::RandomStream;
using svrpf::Vector;

TEST(GaussianMixture, CdfIsTheIntegralOfThePdf) {
  const auto prior = svrpf::bimodal_test_prior();
  double acc = 0.0;
  const double step = 1e-3;
  for (int k = 0; k < 13000; ++k) {
    const double x = -12.0 + step * k;
    acc += 0.5 * step * (prior.pdf(x) + prior.pdf(x + step));
  }
  EXPECT_NEAR(acc, prior.cdf(1.0), 1e-7);
  EXPECT_NEAR(prior.cdf(0.0), 0.5, 1e-15);
}

TEST(GaussianMixture, SampleMoments) {
  const auto prior = svrpf::bimodal_test_prior();
  RandomStream rng(1, 0);
  constexpr int n = 200000;
  double m1 = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = prior.sample(rng);
    m1 += x / n;
    m2 += x * x / n;
  }
  // Var = 1 + 4 = 5.
  EXPECT_NEAR(m1, 0.0, 4.0 * std::sqrt(5.0 / n));
  EXPECT_NEAR(m2, 5.0, 0.05);
}

TEST(MixturePriorModel, MomentsOfTheStationaryLaw) {
  const svrpf::MixturePriorModel model(svrpf::bimodal_test_prior(), 0.2);
  EXPECT_EQ(model.initial_mean()[0], 0.0);
  EXPECT_EQ(model.initial_covariance()(0, 0), 5.0);
  EXPECT_NEAR(model.log_likelihood(Vector::Constant(1, 1.0), Vector::Constant(1, 1.2)),
              std::log(svrpf::normal_pdf(1.0) / 0.2), 1e-13);
}

TEST(QuadratureCdf, MatchesTheNormalCdf) {
  const svrpf::detail::QuadratureCdf cdf([](double x) { return svrpf::normal_pdf(x); }, -3.0, 3.0, 6001);
  const double mass = svrpf::normal_cdf(3.0) - svrpf::normal_cdf(-3.0);
  for (double x : {-2.5, -1.0, 0.0, 0.7, 2.9}) {
    EXPECT_NEAR(cdf(Vector::Constant(1, x)), (svrpf::normal_cdf(x) - svrpf::normal_cdf(-3.0)) / mass, 1e-6);
  }
  EXPECT_EQ(cdf(Vector::Constant(1, -4.0)), 0.0);
  EXPECT_EQ(cdf(Vector::Constant(1, 4.0)), 1.0);
}

TEST(Migration, OneTrialIsConsistent) {
  RandomStream rng(2, 0);
  const auto result = svrpf::migration_check(svrpf::MigrationSetup{}, rng);
  EXPECT_NEAR(result.beta_sum, 1.0, 1e-12);
  EXPECT_LE(result.ks_migration, 0.05);
  EXPECT_LE(result.ks_likelihood, 0.05);
  EXPECT_LE(result.ks_posterior, 0.08);
  EXPECT_LT(result.region.lower(0), 4.0);
  EXPECT_GT(result.region.upper(0), 4.0);
}

TEST(Unbiasedness, CountsComparisonsAndHonoursTheExactSchemes) {
  RandomStream rng(3, 0);
  const auto sys = svrpf::resampling_unbiasedness(svrpf::ResamplingScheme::systematic, 20, 3, 2000, rng);
  EXPECT_EQ(sys.comparisons, 60U);
  EXPECT_LT(sys.max_single_deviation, 1.0);
  const auto mv = svrpf::resampling_unbiasedness(svrpf::ResamplingScheme::min_variance, 20, 3, 2000, rng);
  EXPECT_LT(mv.max_single_deviation, 1.0);
  EXPECT_LE(mv.max_z, 4.5);
  const auto mult = svrpf::resampling_unbiasedness(svrpf::ResamplingScheme::multinomial, 20, 3, 2000, rng);
  EXPECT_GE(mult.max_single_deviation, 1.0);
}

TEST(KalmanAgreementCheck, SmallRunAgrees) {
  const auto model = svrpf::LinearGaussianModel::scalar(0.9, 1.0, 1.0, 1.0, 0.0, 1.0);
  svrpf::SvrpfSettings s;
  s.n = 500;
  s.m = 1000;
  const auto gpf = svrpf::kalman_agreement(model, svrpf::ProposalKind::prior, false, s, 20, 2, 7);
  EXPECT_EQ(gpf.steps, 40U);
  EXPECT_GE(gpf.fraction(), 0.9);
  const auto svr = svrpf::kalman_agreement(model, svrpf::ProposalKind::prior, true, s, 20, 2, 7);
  EXPECT_GE(svr.fraction(), 0.9);
}

TEST(Validation, InjectedFaultIsDetected) {
  auto cfg = svrpf::ExperimentConfig::from(svrpf::Config::parse("validate.inject = unnormalized_weights"));
  RandomStream rng(4, 0);
  const auto checks = svrpf::detail::check_normalization(cfg, rng);
  ASSERT_EQ(checks.size(), 3U);
  EXPECT_TRUE(checks[0].passed);
  EXPECT_TRUE(checks[1].passed);
  EXPECT_FALSE(checks[2].passed);

  cfg.inject = "none";
  RandomStream again(4, 0);
  EXPECT_TRUE(svrpf::detail::check_normalization(cfg, again)[2].passed);
}

}  // namespace
