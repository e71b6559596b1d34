#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmw/channel_model.hpp"
#include "mmw/random.hpp"

namespace mmw {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Uniform planar array. Elements sit on a horizontal x vertical grid in the
/// plane normal to `boresight_azimuth`; `downtilt` rotates the broadside
/// direction below the horizon (radians, positive = down).
struct ArrayGeometry {
    int n_horizontal = 1;
    int n_vertical = 1;
    double element_spacing = 0.5;  // wavelengths
    double boresight_azimuth = 0.0;
    double downtilt = 0.0;

    int size() const { return n_horizontal * n_vertical; }
    void validate() const;
};

/// Unit-norm response; element (p, q) carries phase
/// 2*pi*spacing*(p*sin(az - boresight)*cos(el') + q*sin(el')), el' = el + downtilt.
/// Element index is p + n_horizontal * q.
CVector array_response(const ArrayGeometry& geom, double az, double el);

struct Subpath {
    int cluster = 0;
    double aod_az = 0.0;
    double aod_el = 0.0;
    double aoa_az = 0.0;
    double aoa_el = 0.0;
    double power = 0.0;          // variance of the complex gain, linear
    double doppler_angle = 0.0;  // angle to the direction of motion
};

struct SubpathSet {
    std::vector<Subpath> paths;
    int subpaths_per_cluster = 0;
    double total_power() const;
};

/// Draws the Doppler angle of a subpath. The default is uniform on [0, 2*pi)
/// independent of the arrival direction.
using DopplerPolicy = std::function<double(const Subpath&, Rng&)>;
double uniform_doppler(const Subpath&, Rng& rng);

SubpathSet synthesize_subpaths(const LinkRealization& link, int subpaths_per_cluster, Rng& rng,
                               const DopplerPolicy& doppler = uniform_doppler);

struct ChannelMatrix {
    CMatrix h;  // n_rx x n_tx
    double t = 0.0;
    double f_dmax = 0.0;
};

/// Complex small-scale gains g_bar ~ CN(0, power), one per subpath.
std::vector<cplx> draw_small_scale(const SubpathSet& sub, Rng& rng);

ChannelMatrix channel_matrix(const SubpathSet& sub, const std::vector<cplx>& gains, const ArrayGeometry& rx,
                             const ArrayGeometry& tx, double t, double f_dmax);
ChannelMatrix channel_matrix(const SubpathSet& sub, const ArrayGeometry& rx, const ArrayGeometry& tx, double t,
                             double f_dmax, Rng& rng);

/// Columns sqrt(power) * u(angle) for every subpath at one link end, so the
/// spatial covariance at that end is A * A^H.
CMatrix steering_factor(const SubpathSet& sub, const ArrayGeometry& geom, bool rx_end);

struct SpatialCovariancePair {
    CMatrix q_rx;
    CMatrix q_tx;
};

SpatialCovariancePair covariances(const SubpathSet& sub, const ArrayGeometry& rx, const ArrayGeometry& tx);

struct BfGain {
    double gain_rx = 0.0;  // dB
    double gain_tx = 0.0;  // dB
    double total = 0.0;    // dB
};

/// Dominant-eigenvalue gain over the flat-spectrum average at each end.
double eigen_gain_db(const CMatrix& q);
BfGain bf_gain_long_term(const SpatialCovariancePair& cov);

/// Dominant singular value of H against its omnidirectional average.
double bf_gain_instantaneous(const ChannelMatrix& h);

struct BeamPair {
    CVector v_rx;
    CVector v_tx;
};

struct DominantEigen {
    double value = 0.0;
    CVector vector;
};

/// Rotates v so that its first non-negligible component is real positive.
void normalize_phase(CVector& v);

/// Largest eigenpair of a Hermitian PSD matrix, phase-normalized.
DominantEigen dominant_eigen(const CMatrix& q);
/// Largest eigenpair of A * A^H without forming it when A is wide.
DominantEigen dominant_eigen_of_factor(const CMatrix& a);
/// Eigenvalues of A * A^H in descending order (nonzero part only when A is thin).
Eigen::VectorXd eigenvalues_of_factor(const CMatrix& a);

BeamPair beamforming_vectors(const SpatialCovariancePair& cov);

/// E|v_rx^H H v_tx|^2 under the Kronecker approximation for unit-norm
/// responses: (v_rx^H Q_rx v_rx)(v_tx^H Q_tx v_tx) / tr(Q_rx).
double expected_link_gain(const CVector& v_rx, const CVector& v_tx, const SpatialCovariancePair& cov);

/// v^H (A A^H) v = ||A^H v||^2.
double factor_quadratic(const CMatrix& a, const CVector& v);

/// Fraction of energy captured by optimal rank-r subspaces at both ends.
double power_fraction(const SpatialCovariancePair& cov, int r);
double power_fraction_from_eigenvalues(const Eigen::VectorXd& rx_desc, const Eigen::VectorXd& tx_desc, int r);

/// Row-major, little-endian float64, interleaved (re, im). No header.
void write_matrix_binary(const std::string& path, const CMatrix& m);
CMatrix read_matrix_binary(const std::string& path, int rows, int cols);
/// One matrix row per line as re,im,re,im,...
void write_matrix_csv(const std::string& path, const CMatrix& m);

}  // namespace mmw
