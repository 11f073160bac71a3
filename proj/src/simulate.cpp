#include "tomoboost/simulate.hpp"

#include "tomoboost/parallel.hpp"
#include "tomoboost/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <complex>

namespace tomoboost {

using std::complex;

void SceneSpec::validate() const {
  require(rows > 0 && cols > 0, "scene: dimensions must be positive");
  require(dtm_min <= dtm_max, "scene: dtm range must satisfy min <= max");
  require(canopy_min <= canopy_max, "scene: canopy range must satisfy min <= max");
  require(canopy_min >= 0.0, "scene: canopy thickness must be non-negative");
  require(dtm_min + canopy_min >= 0.0, "scene: top-of-canopy heights must be non-negative");
  require(terrain_correlation >= 0.0 && canopy_correlation >= 0.0 &&
              phase_screen_correlation >= 0.0,
          "scene: correlation lengths must be non-negative");
  require(ground_pol_powers.minCoeff() >= 0.0 && volume_pol_powers.minCoeff() >= 0.0,
          "scene: polarimetric powers must be non-negative");
  require(ground_to_volume_ratio >= 0.0, "scene: ground_to_volume_ratio must be non-negative");
  require(ground_to_volume_ratio * ground_pol_powers.sum() + volume_pol_powers.sum() > 0.0,
          "scene: total scattered power must be positive");
  require(extinction >= 0.0, "scene: extinction must be non-negative");
  require(phase_screen_sigma >= 0.0, "scene: phase screen sigma must be non-negative");
}

VerticalWavenumbers vertical_wavenumbers(const AcquisitionGeometry& geometry) {
  geometry.validate();
  const double denom =
      geometry.wavelength * geometry.slant_range() * std::sin(geometry.incidence_angle);
  VerticalWavenumbers out;
  out.kz.resize(geometry.num_baselines());
  for (int n = 0; n < geometry.num_baselines(); ++n)
    out.kz[n] = 4.0 * std::numbers::pi * geometry.baselines[n] / denom;
  return out;
}

double vertical_resolution(const AcquisitionGeometry& geometry) {
  const Eigen::VectorXd kz = vertical_wavenumbers(geometry).kz;
  return 2.0 * std::numbers::pi / (kz.maxCoeff() - kz.minCoeff());
}

namespace {

// integral_0^h exp(w z) dz, stable for small |w h|.
complex<double> segment_integral(complex<double> w, double h) {
  const complex<double> wh = w * h;
  if (std::abs(wh) < 1e-6) return h * (1.0 + wh / 2.0 + wh * wh / 6.0);
  return (std::exp(wh) - 1.0) / w;
}

// Normalized volume coherence between acquisitions with wavenumber
// difference dk: extinction-weighted phase integral over the layer.
complex<double> volume_coherence(double profile_rate, double dk, double z_ground, double h) {
  const complex<double> phase_ground = std::polar(1.0, dk * z_ground);
  if (h < 1e-12) return phase_ground;
  const complex<double> numerator = segment_integral({profile_rate, dk}, h);
  const complex<double> denominator = segment_integral({profile_rate, 0.0}, h);
  return phase_ground * numerator / denominator;
}

Eigen::MatrixXcd model_covariance(double z_ground, double canopy_height, const SceneSpec& spec,
                                  const AcquisitionGeometry& geometry,
                                  const Eigen::VectorXd& kz) {
  const int nb = geometry.num_baselines();
  const int order = 3 * nb;
  const double mu = spec.ground_to_volume_ratio;
  const double profile_rate = 2.0 * spec.extinction / std::cos(geometry.incidence_angle);

  Eigen::VectorXcd g(nb);
  for (int n = 0; n < nb; ++n) g[n] = std::polar(1.0, kz[n] * z_ground);

  Eigen::MatrixXcd vol(nb, nb);
  for (int m = 0; m < nb; ++m) {
    vol(m, m) = 1.0;
    for (int n = m + 1; n < nb; ++n) {
      vol(m, n) = volume_coherence(profile_rate, kz[m] - kz[n], z_ground, canopy_height);
      vol(n, m) = std::conj(vol(m, n));
    }
  }

  Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(order, order);
  for (int m = 0; m < nb; ++m)
    for (int n = 0; n < nb; ++n) {
      const complex<double> ground = mu * g[m] * std::conj(g[n]);
      for (int q = 0; q < 3; ++q)
        cov(3 * m + q, 3 * n + q) =
            ground * spec.ground_pol_powers[q] + vol(m, n) * spec.volume_pol_powers[q];
    }
  return cov;
}

Eigen::MatrixXd white_noise(int rows, int cols, std::uint64_t seed, std::uint64_t stream,
                            int threads) {
  Eigen::MatrixXd field(rows, cols);
  parallel_for(rows, threads, [&](std::int64_t r) {
    for (int c = 0; c < cols; ++c) field(r, c) = Rng(seed, stream, std::uint64_t(r), c).normal();
  });
  return field;
}

// Separable Gaussian blur, kernel truncated at 3 sigma and renormalized at
// the borders.
Eigen::MatrixXd gaussian_blur(const Eigen::MatrixXd& in, double sigma, int threads) {
  if (sigma <= 0.0) return in;
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  Eigen::VectorXd kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k)
    kernel[k + radius] = std::exp(-0.5 * (double(k) * k) / (sigma * sigma));

  const int rows = int(in.rows()), cols = int(in.cols());
  Eigen::MatrixXd horizontal(rows, cols);
  parallel_for(rows, threads, [&](std::int64_t r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0, wsum = 0.0;
      const int lo = std::max(-radius, -c), hi = std::min(radius, cols - 1 - c);
      for (int k = lo; k <= hi; ++k) {
        acc += kernel[k + radius] * in(r, c + k);
        wsum += kernel[k + radius];
      }
      horizontal(r, c) = acc / wsum;
    }
  });

  Eigen::MatrixXd out(rows, cols);
  parallel_for(rows, threads, [&](std::int64_t r) {
    const int lo = std::max<int>(-radius, -int(r)), hi = std::min<int>(radius, rows - 1 - int(r));
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (int k = lo; k <= hi; ++k) {
        acc += kernel[k + radius] * horizontal(r + k, c);
        wsum += kernel[k + radius];
      }
      out(r, c) = acc / wsum;
    }
  });
  return out;
}

Eigen::MatrixXd smooth_field(int rows, int cols, double correlation, std::uint64_t seed,
                             std::uint64_t stream, int threads) {
  return gaussian_blur(white_noise(rows, cols, seed, stream, threads), correlation, threads);
}

Eigen::MatrixXd rescale_into(const Eigen::MatrixXd& field, double lo, double hi) {
  const double fmin = field.minCoeff(), fmax = field.maxCoeff();
  if (hi <= lo) return Eigen::MatrixXd::Constant(field.rows(), field.cols(), lo);
  if (fmax <= fmin) return Eigen::MatrixXd::Constant(field.rows(), field.cols(), (lo + hi) / 2.0);
  return ((field.array() - fmin) / (fmax - fmin) * (hi - lo) + lo).matrix();
}

Eigen::MatrixXd scale_to_sigma(const Eigen::MatrixXd& field, double sigma) {
  const double mean = field.mean();
  const double var = (field.array() - mean).square().mean();
  if (var <= 0.0) return Eigen::MatrixXd::Zero(field.rows(), field.cols());
  return ((field.array() - mean) / std::sqrt(var) * sigma).matrix();
}

}  // namespace

CovarianceMatrix pixel_covariance_model(double z_ground, double canopy_height,
                                        const SceneSpec& spec,
                                        const AcquisitionGeometry& geometry) {
  require(canopy_height >= 0.0, "pixel_covariance_model: canopy height must be >= 0");
  spec.validate();
  CovarianceMatrix cov;
  cov.window = 1;
  cov.values =
      model_covariance(z_ground, canopy_height, spec, geometry, vertical_wavenumbers(geometry).kz);
  return cov;
}

std::pair<HeightRaster, HeightRaster> generate_ground_truth(const SceneSpec& spec) {
  spec.validate();
  const int threads = 0;

  Eigen::MatrixXd terrain = rescale_into(
      smooth_field(spec.rows, spec.cols, spec.terrain_correlation, spec.seed, streams::kTerrain,
                   threads),
      spec.dtm_min, spec.dtm_max);
  Eigen::MatrixXd canopy = rescale_into(
      smooth_field(spec.rows, spec.cols, spec.canopy_correlation, spec.seed, streams::kCanopy,
                   threads),
      spec.canopy_min, spec.canopy_max);

  HeightRaster dtm;
  dtm.rows = spec.rows;
  dtm.cols = spec.cols;
  dtm.kind = RasterKind::Dtm;
  dtm.values = std::move(terrain);
  snap_to_float32(dtm);

  HeightRaster chm;
  chm.rows = spec.rows;
  chm.cols = spec.cols;
  chm.kind = RasterKind::Chm;
  chm.values = dtm.values + canopy;
  snap_to_float32(chm);

  return {std::move(dtm), std::move(chm)};
}

SimulatedScene simulate_stack(const SceneSpec& spec, const AcquisitionGeometry& geometry,
                              int threads) {
  spec.validate();
  geometry.validate();
  const Eigen::VectorXd kz = vertical_wavenumbers(geometry).kz;
  const int nb = geometry.num_baselines();
  const int order = 3 * nb;

  SimulatedScene scene;
  auto [dtm, chm] = generate_ground_truth(spec);
  scene.dtm = std::move(dtm);
  scene.chm = std::move(chm);

  // Smooth per-acquisition phase error fields; the master stays clean.
  std::vector<Eigen::MatrixXd> screens;
  if (spec.phase_screen_sigma > 0.0) {
    screens.resize(nb);
    for (int n = 1; n < nb; ++n)
      screens[n] = scale_to_sigma(
          smooth_field(spec.rows, spec.cols, spec.phase_screen_correlation, spec.seed,
                       streams::kPhaseScreen + std::uint64_t(n), threads),
          spec.phase_screen_sigma);
  }

  scene.stack.geometry = geometry;
  scene.stack.rows = spec.rows;
  scene.stack.cols = spec.cols;
  scene.stack.channels.assign(order, Eigen::MatrixXcd(spec.rows, spec.cols));

  parallel_for(spec.rows, threads, [&](std::int64_t r) {
    Eigen::MatrixXcd cov(order, order);
    Eigen::VectorXcd draw(order);
    for (int c = 0; c < spec.cols; ++c) {
      const double z_ground = scene.dtm.values(r, c);
      const double canopy_height = std::max(0.0, scene.chm.values(r, c) - z_ground);
      cov = model_covariance(z_ground, canopy_height, spec, geometry, kz);

      // Bare-ground pixels are legitimately rank-3, so the factorization
      // gets a diagonal jitter capped at 1e-9 * trace.
      const double trace = cov.real().diagonal().sum();
      Eigen::LLT<Eigen::MatrixXcd> llt;
      double jitter = 1e-12 * trace;
      for (;;) {
        llt.compute(cov + jitter * Eigen::MatrixXcd::Identity(order, order));
        if (llt.info() == Eigen::Success) break;
        jitter *= 10.0;
        if (jitter > 1e-9 * trace) fail("simulate_stack: covariance factorization failed");
      }

      Rng rng(spec.seed, streams::kSpeckle, std::uint64_t(r), std::uint64_t(c));
      constexpr double inv_sqrt2 = 0.70710678118654752440;
      for (int k = 0; k < order; ++k)
        draw[k] = complex<double>(rng.normal() * inv_sqrt2, rng.normal() * inv_sqrt2);
      draw = llt.matrixL() * draw;

      if (!screens.empty()) {
        for (int n = 1; n < nb; ++n) {
          const complex<double> rotation = std::polar(1.0, screens[n](r, c));
          for (int q = 0; q < 3; ++q) draw[3 * n + q] *= rotation;
        }
      }
      for (int k = 0; k < order; ++k) scene.stack.channels[k](r, c) = draw[k];
    }
  });

  return scene;
}

Eigen::VectorXd fourier_profile(const CovarianceMatrix& cov, const Eigen::VectorXd& z_grid,
                                const AcquisitionGeometry& geometry) {
  require(z_grid.size() > 0, "fourier_profile: empty z grid");
  const double trace = std::max(cov.values.real().diagonal().sum(), 1e-300);
  if (hermitian_asymmetry(cov.values) > 1e-12 * trace)
    throw std::invalid_argument("fourier_profile: covariance is not Hermitian");

  const int nb = geometry.num_baselines();
  require(cov.order() == 3 * nb, "fourier_profile: covariance order does not match geometry");
  const Eigen::VectorXd kz = vertical_wavenumbers(geometry).kz;

  // HV sub-covariance (channel indices 3n + 1).
  Eigen::MatrixXcd hv(nb, nb);
  for (int m = 0; m < nb; ++m)
    for (int n = 0; n < nb; ++n) hv(m, n) = cov.values(3 * m + 1, 3 * n + 1);

  Eigen::VectorXd power(z_grid.size());
  const double norm = 1.0 / std::sqrt(double(nb));
  Eigen::VectorXcd steering(nb);
  for (Eigen::Index i = 0; i < z_grid.size(); ++i) {
    for (int n = 0; n < nb; ++n) steering[n] = std::polar(norm, kz[n] * z_grid[i]);
    power[i] = (steering.adjoint() * hv * steering)(0, 0).real();
  }
  return power;
}

}  // namespace tomoboost
