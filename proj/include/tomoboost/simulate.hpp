#pragma once

#include "tomoboost/features.hpp"
#include "tomoboost/raster.hpp"
#include "tomoboost/stack.hpp"

#include <cstdint>
#include <utility>

namespace tomoboost {

/// Scene description for the synthetic MPMB generator. Terrain and canopy
/// are smooth random fields; the scattering model is a two-layer
/// ground-plus-volume covariance with diagonal polarimetric powers.
/// phase_screen_sigma > 0 adds smooth per-acquisition phase errors, the
/// non-calibrated flavor of the data.
struct SceneSpec {
  int rows = 512;
  int cols = 512;
  double dtm_min = 0.0, dtm_max = 40.0;       // m
  double canopy_min = 0.0, canopy_max = 60.0; // m, canopy thickness (chm - dtm)
  double terrain_correlation = 48.0;          // px
  double canopy_correlation = 24.0;           // px
  Eigen::Vector3d ground_pol_powers{1.0, 0.02, 0.8};   // HH, HV, VV
  Eigen::Vector3d volume_pol_powers{0.35, 1.0, 0.35};  // HH, HV, VV
  double ground_to_volume_ratio = 2.0;
  double extinction = 0.03;                   // Np/m, one-way
  double phase_screen_sigma = 1.0;            // rad, 0 = calibrated
  double phase_screen_correlation = 64.0;     // px
  std::uint64_t seed = 42;

  void validate() const;
};

struct VerticalWavenumbers {
  Eigen::VectorXd kz;  // rad/m, kz[0] == 0 (master)
};

/// kz[n] = 4*pi*b_n / (lambda * r * sin(theta)), slant range r = H/cos(theta).
VerticalWavenumbers vertical_wavenumbers(const AcquisitionGeometry& geometry);

/// 2*pi / span(kz): nominal vertical resolution of the baseline set, meters.
double vertical_resolution(const AcquisitionGeometry& geometry);

/// Expected channel covariance for one pixel: ground contribution
/// mu * Cg (x) g g^H at height z_ground plus a volume layer of the given
/// thickness with exponential extinction profile. Hermitian PSD by
/// construction; window = 1.
CovarianceMatrix pixel_covariance_model(double z_ground, double canopy_height,
                                        const SceneSpec& spec,
                                        const AcquisitionGeometry& geometry);

/// Smooth seeded DTM and CHM rasters. CHM stores terrain plus canopy
/// thickness (top-of-canopy height); the thickness field is rescaled into
/// [canopy_min, canopy_max]. Deterministic in spec.seed.
std::pair<HeightRaster, HeightRaster> generate_ground_truth(const SceneSpec& spec);

struct SimulatedScene {
  SlcStack stack;
  HeightRaster dtm;
  HeightRaster chm;
};

/// Draw one circular complex Gaussian vector per pixel with the model
/// covariance, then apply phase screens when phase_screen_sigma > 0.
/// Pure function of (spec, geometry, seed) for any thread count.
SimulatedScene simulate_stack(const SceneSpec& spec, const AcquisitionGeometry& geometry,
                              int threads = 0);

/// Fourier beamforming power profile of the HV sub-covariance:
/// P(z) = a(z)^H R_hv a(z), a(z)[n] = exp(i kz[n] z)/sqrt(Nb).
/// Simulator sanity probe only.
Eigen::VectorXd fourier_profile(const CovarianceMatrix& cov, const Eigen::VectorXd& z_grid,
                                const AcquisitionGeometry& geometry);

}  // namespace tomoboost
