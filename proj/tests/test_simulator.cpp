#include "tomoboost/simulate.hpp"

#include "oracles.hpp"
#include "tomoboost/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace tomoboost;

namespace {

// Geometry whose second track gives kz[1] = target (rad/m).
AcquisitionGeometry geometry_with_kz(double target) {
  AcquisitionGeometry geom;
  const double denom =
      geom.wavelength * geom.slant_range() * std::sin(geom.incidence_angle);
  geom.baselines = {0.0, target * denom / (4.0 * std::numbers::pi)};
  return geom;
}

SceneSpec homogeneous_scene(int size, double terrain, double canopy, std::uint64_t seed) {
  SceneSpec spec;
  spec.rows = spec.cols = size;
  spec.dtm_min = spec.dtm_max = terrain;
  spec.canopy_min = spec.canopy_max = canopy;
  spec.phase_screen_sigma = 0.0;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("vertical wavenumber of the -75 m track") {
  AcquisitionGeometry geom;
  geom.baselines = {0.0, -75.0};
  const VerticalWavenumbers kz = vertical_wavenumbers(geom);
  CHECK(kz.kz[0] == 0.0);
  CHECK(kz.kz[1] == doctest::Approx(-0.44944).epsilon(2e-3));
  CHECK(geom.slant_range() == doctest::Approx(4839.0).epsilon(1e-3));
}

TEST_CASE("kz scales linearly with the baselines") {
  AcquisitionGeometry geom;
  const Eigen::VectorXd kz1 = vertical_wavenumbers(geom).kz;
  for (auto& b : geom.baselines) b *= 2.0;
  const Eigen::VectorXd kz2 = vertical_wavenumbers(geom).kz;
  CHECK((kz2 - 2.0 * kz1).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("duplicate baselines are rejected upstream") {
  AcquisitionGeometry geom;
  geom.baselines = {0.0, 0.0};
  CHECK_THROWS_AS(vertical_wavenumbers(geom), std::invalid_argument);
}

TEST_CASE("nominal vertical resolution sits in the expected bracket") {
  // 2*pi / span(kz) with the default tracks; approximately 14 m.
  const double res = vertical_resolution(AcquisitionGeometry{});
  CHECK(res >= 13.9);
  CHECK(res <= 24.1);
}

TEST_CASE("volume coherence closed form matches quadrature") {
  SceneSpec spec;
  spec.ground_to_volume_ratio = 0.0;  // isolates the volume term
  const AcquisitionGeometry geom = geometry_with_kz(0.1);
  const double dk = -0.1;  // kz[0] - kz[1]

  SUBCASE("no extinction, h = 20 m") {
    spec.extinction = 0.0;
    const CovarianceMatrix cov = pixel_covariance_model(0.0, 20.0, spec, geom);
    // V[0,1] = R[(0,HV),(1,HV)] / volume HV power
    const std::complex<double> v01 = cov.values(1, 4) / spec.volume_pol_powers[1];
    CHECK(std::abs(v01) == doctest::Approx(std::sin(1.0) / 1.0).epsilon(1e-9));
    CHECK(v01.real() == doctest::Approx(0.45465).epsilon(1e-3));
    CHECK(std::abs(v01.imag()) == doctest::Approx(0.70807).epsilon(1e-3));

    const auto ref = oracle::volume_coherence_quadrature(0.0, dk, 0.0, 20.0);
    CHECK(std::abs(v01 - ref) < 1e-8);
  }

  SUBCASE("extinction and elevated ground") {
    spec.extinction = 0.08;
    const double rate = 2.0 * spec.extinction / std::cos(geom.incidence_angle);
    for (double h : {0.5, 7.0, 33.0}) {
      const CovarianceMatrix cov = pixel_covariance_model(12.0, h, spec, geom);
      const std::complex<double> v01 = cov.values(1, 4) / spec.volume_pol_powers[1];
      const auto ref = oracle::volume_coherence_quadrature(rate, dk, 12.0, h);
      CHECK(std::abs(v01 - ref) < 1e-7);
    }
  }
}

TEST_CASE("bare ground collapses to a rank-3 phase center") {
  SceneSpec spec;
  const CovarianceMatrix cov = pixel_covariance_model(10.0, 0.0, spec, AcquisitionGeometry{});
  cov.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov.values, Eigen::EigenvaluesOnly);
  const double trace = cov.values.real().diagonal().sum();
  int significant = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()[i] > 1e-9 * trace) ++significant;
  CHECK(significant <= 3);
}

TEST_CASE("normalized volume: unit diagonal without extinction") {
  SceneSpec spec;
  spec.extinction = 0.0;
  spec.ground_to_volume_ratio = 0.0;
  const CovarianceMatrix cov = pixel_covariance_model(5.0, 25.0, spec, AcquisitionGeometry{});
  for (int k = 0; k < cov.order(); ++k)
    CHECK(cov.values(k, k).real() ==
          doctest::Approx(spec.volume_pol_powers[k % 3]).epsilon(1e-12));
}

TEST_CASE("model covariances are Hermitian PSD across random states") {
  SceneSpec spec;
  AcquisitionGeometry geom;
  Rng rng(99, 1, 2, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const double z = -10.0 + 60.0 * rng.uniform();
    const double h = 60.0 * rng.uniform();
    const CovarianceMatrix cov = pixel_covariance_model(z, h, spec, geom);
    const double trace = cov.values.real().diagonal().sum();
    CHECK(hermitian_asymmetry(cov.values) < 1e-12 * trace);
    CHECK(min_eigenvalue(cov) >= -1e-9 * trace);
  }
}

TEST_CASE("volume decorrelation is monotone in |dk| h over the first lobe") {
  SceneSpec spec;
  spec.extinction = 0.0;
  spec.ground_to_volume_ratio = 0.0;
  const double h = 30.0;
  double previous = 2.0;
  for (double x = 0.05; x < 2.0 * std::numbers::pi; x += 0.1) {
    const AcquisitionGeometry geom = geometry_with_kz(x / h);
    const CovarianceMatrix cov = pixel_covariance_model(0.0, h, spec, geom);
    const double coher = std::abs(cov.values(1, 4)) / spec.volume_pol_powers[1];
    CHECK(coher <= previous + 1e-12);
    previous = coher;
  }
}

TEST_CASE("ground truth fields: determinism, bounds, degenerate ranges") {
  SceneSpec spec;
  spec.rows = spec.cols = 96;
  spec.dtm_min = 0.0;
  spec.dtm_max = 0.0;
  spec.canopy_min = 0.0;
  spec.canopy_max = 60.0;
  spec.seed = 5;

  auto [dtm, chm] = generate_ground_truth(spec);
  auto [dtm2, chm2] = generate_ground_truth(spec);
  CHECK(dtm.values == dtm2.values);
  CHECK(chm.values == chm2.values);

  CHECK(dtm.values.minCoeff() == 0.0);
  CHECK(dtm.values.maxCoeff() == 0.0);
  CHECK(chm.values.minCoeff() >= 0.0);
  CHECK(chm.values.maxCoeff() <= 60.0);
  CHECK(chm.values.maxCoeff() > 30.0);  // the rescale reaches its bounds
  CHECK(((chm.values - dtm.values).minCoeff()) >= 0.0);

  SceneSpec flat = spec;
  flat.dtm_min = flat.dtm_max = 5.0;
  flat.canopy_min = flat.canopy_max = 0.0;
  auto [dtm5, chm5] = generate_ground_truth(flat);
  CHECK(dtm5.values.minCoeff() == 5.0);
  CHECK(dtm5.values.maxCoeff() == 5.0);
  CHECK(chm5.values == dtm5.values);
}

TEST_CASE("simulated stacks are deterministic in seed and thread count") {
  SceneSpec spec;
  spec.rows = spec.cols = 24;
  spec.seed = 11;
  AcquisitionGeometry geom;
  const SimulatedScene a = simulate_stack(spec, geom, 1);
  const SimulatedScene b = simulate_stack(spec, geom, 2);
  const SimulatedScene c = simulate_stack(spec, geom, 3);
  for (int k = 0; k < a.stack.num_channels(); ++k) {
    CHECK(a.stack.channels[k] == b.stack.channels[k]);
    CHECK(a.stack.channels[k] == c.stack.channels[k]);
  }
  spec.seed = 12;
  const SimulatedScene d = simulate_stack(spec, geom, 2);
  CHECK(a.stack.channels[0] != d.stack.channels[0]);
}

TEST_CASE("phase screens only rotate samples") {
  SceneSpec calibrated;
  calibrated.rows = calibrated.cols = 16;
  calibrated.seed = 21;
  calibrated.phase_screen_sigma = 0.0;
  SceneSpec screened = calibrated;
  screened.phase_screen_sigma = 1.0;

  AcquisitionGeometry geom;
  const SimulatedScene c = simulate_stack(calibrated, geom, 2);
  const SimulatedScene nc = simulate_stack(screened, geom, 2);

  // master channels untouched, others modulus-preserving
  for (int q = 0; q < 3; ++q) CHECK(c.stack.channels[q] == nc.stack.channels[q]);
  double max_rel = 0.0;
  bool rotated = false;
  for (int k = 3; k < c.stack.num_channels(); ++k)
    for (int r = 0; r < c.stack.rows; ++r)
      for (int col = 0; col < c.stack.cols; ++col) {
        const auto uc = c.stack.channels[k](r, col);
        const auto un = nc.stack.channels[k](r, col);
        max_rel = std::max(max_rel, std::abs(std::abs(un) - std::abs(uc)) /
                                        std::max(std::abs(uc), 1e-30));
        if (std::abs(un - uc) > 1e-6 * std::abs(uc)) rotated = true;
      }
  CHECK(max_rel < 1e-12);
  CHECK(rotated);
}

TEST_CASE("sample covariance of 1e4 homogeneous draws converges to the model") {
  const SceneSpec spec = homogeneous_scene(100, 12.0, 28.0, 31);
  AcquisitionGeometry geom;
  const SimulatedScene scene = simulate_stack(spec, geom, 2);
  const CovarianceMatrix truth = pixel_covariance_model(12.0, 28.0, spec, geom);

  const int order = scene.stack.num_channels();
  Eigen::MatrixXcd sample = Eigen::MatrixXcd::Zero(order, order);
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) {
      const Eigen::VectorXcd u = scene.stack.pixel_vector(r, c);
      sample.selfadjointView<Eigen::Lower>().rankUpdate(u, 1.0);
    }
  sample = sample.selfadjointView<Eigen::Lower>();
  sample /= double(spec.rows) * spec.cols;

  const double rel = (sample - truth.values).norm() / truth.values.norm();
  CHECK(rel < 0.05);
}

TEST_CASE("fourier profile basics") {
  AcquisitionGeometry geom;
  const int order = geom.num_channels();

  SUBCASE("identity covariance gives a flat unit spectrum") {
    CovarianceMatrix eye{Eigen::MatrixXcd::Identity(order, order), 1};
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(41, -20.0, 20.0);
    const Eigen::VectorXd p = fourier_profile(eye, grid, geom);
    for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("bare ground peaks at its elevation") {
    SceneSpec spec;
    const CovarianceMatrix cov = pixel_covariance_model(10.0, 0.0, spec, geom);
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(161, -20.0, 60.0);  // 0.5 m steps
    const Eigen::VectorXd p = fourier_profile(cov, grid, geom);
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    CHECK(std::abs(grid[best] - 10.0) <= 0.5 + 1e-12);
  }

  SUBCASE("non-Hermitian input is rejected") {
    CovarianceMatrix bad{Eigen::MatrixXcd::Identity(order, order), 1};
    bad.values(0, 1) = 5.0;
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(3, 0.0, 1.0);
    CHECK_THROWS_AS(fourier_profile(bad, grid, geom), std::invalid_argument);
  }
}

TEST_CASE("two point scatterers resolve at 25 m and merge at 10 m") {
  AcquisitionGeometry geom;
  const Eigen::VectorXd kz = vertical_wavenumbers(geom).kz;
  const int nb = geom.num_baselines();
  const int order = geom.num_channels();

  auto two_scatterer_profile = [&](double z1, double z2) {
    CovarianceMatrix cov{Eigen::MatrixXcd::Zero(order, order), 1};
    for (double z : {z1, z2}) {
      Eigen::VectorXcd v(nb);
      for (int n = 0; n < nb; ++n) v[n] = std::polar(1.0, kz[n] * z);
      for (int m = 0; m < nb; ++m)
        for (int n = 0; n < nb; ++n)
          cov.values(3 * m + 1, 3 * n + 1) += v[m] * std::conj(v[n]);
    }
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(321, -10.0, 70.0);  // 0.25 m
    return std::pair{grid, fourier_profile(cov, grid, geom)};
  };

  // half-power criterion: one resolved peak per connected region above
  // 0.5 * max
  auto count_lobes = [](const Eigen::VectorXd& p) {
    const double floor = 0.5 * p.maxCoeff();
    int lobes = 0;
    bool inside = false;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p[i] > floor && !inside) ++lobes;
      inside = p[i] > floor;
    }
    return lobes;
  };

  auto [grid_far, p_far] = two_scatterer_profile(15.0, 40.0);
  CHECK(count_lobes(p_far) == 2);

  auto [grid_near, p_near] = two_scatterer_profile(15.0, 25.0);
  CHECK(count_lobes(p_near) == 1);
}
