#include "mmw/mimo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "mmw/error.hpp"

namespace mmw {

namespace {

constexpr double kPi = std::numbers::pi;

double fold_elevation(double el) {
    // reflect into [-pi/2, pi/2]
    double e = std::remainder(el, 2.0 * kPi);
    if (e > kPi / 2.0) e = kPi - e;
    if (e < -kPi / 2.0) e = -kPi - e;
    return e;
}

double trace_real(const CMatrix& q) { return q.trace().real(); }

Eigen::VectorXd descending(const Eigen::VectorXd& ascending) {
    Eigen::VectorXd out = ascending.reverse();
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = std::max(out(i), 0.0);
    return out;
}

}  // namespace

void ArrayGeometry::validate() const {
    require(n_horizontal >= 1 && n_vertical >= 1, "array dimensions must be positive");
    require(element_spacing > 0.0, "element spacing must be positive");
}

CVector array_response(const ArrayGeometry& geom, double az, double el) {
    const int nh = geom.n_horizontal;
    const int nv = geom.n_vertical;
    const double elt = el + geom.downtilt;
    const double kx = 2.0 * kPi * geom.element_spacing * std::sin(az - geom.boresight_azimuth) * std::cos(elt);
    const double kz = 2.0 * kPi * geom.element_spacing * std::sin(elt);
    const double scale = 1.0 / std::sqrt(static_cast<double>(nh * nv));
    // phase progressions by repeated rotation; arrays are small
    const cplx step_h = std::polar(1.0, kx);
    const cplx step_v = std::polar(1.0, kz);
    CVector u(nh * nv);
    cplx vq(scale, 0.0);
    for (int q = 0; q < nv; ++q) {
        cplx e = vq;
        for (int p = 0; p < nh; ++p) {
            u(p + nh * q) = e;
            e *= step_h;
        }
        vq *= step_v;
    }
    return u;
}

double SubpathSet::total_power() const {
    double s = 0.0;
    for (const auto& p : paths) s += p.power;
    return s;
}

double uniform_doppler(const Subpath&, Rng& rng) { return 2.0 * kPi * rng.uniform(); }

SubpathSet synthesize_subpaths(const LinkRealization& link, int subpaths_per_cluster, Rng& rng,
                               const DopplerPolicy& doppler) {
    if (link.outage()) fail(ErrorCode::Outage, "cannot synthesize subpaths for a link in outage");
    require(subpaths_per_cluster >= 1, "need at least one subpath per cluster");
    const double omni = link.omni_gain();
    const double per_path = omni / subpaths_per_cluster;

    SubpathSet out;
    out.subpaths_per_cluster = subpaths_per_cluster;
    out.paths.reserve(link.clusters.size() * static_cast<std::size_t>(subpaths_per_cluster));
    for (std::size_t k = 0; k < link.clusters.size(); ++k) {
        const PathCluster& c = link.clusters[k];
        for (int l = 0; l < subpaths_per_cluster; ++l) {
            Subpath s;
            s.cluster = static_cast<int>(k);
            s.aod_az = wrap_angle(c.aod_az + c.spread_aod_az * rng.normal());
            s.aod_el = fold_elevation(c.aod_el + c.spread_aod_el * rng.normal());
            s.aoa_az = wrap_angle(c.aoa_az + c.spread_aoa_az * rng.normal());
            s.aoa_el = fold_elevation(c.aoa_el + c.spread_aoa_el * rng.normal());
            s.power = c.power_fraction * per_path;
            s.doppler_angle = doppler(s, rng);
            out.paths.push_back(s);
        }
    }
    return out;
}

std::vector<cplx> draw_small_scale(const SubpathSet& sub, Rng& rng) {
    std::vector<cplx> g;
    g.reserve(sub.paths.size());
    for (const auto& p : sub.paths) {
        const double s = std::sqrt(p.power / 2.0);
        const double re = rng.normal();
        const double im = rng.normal();
        g.emplace_back(s * re, s * im);
    }
    return g;
}

CMatrix steering_factor(const SubpathSet& sub, const ArrayGeometry& geom, bool rx_end) {
    CMatrix a(geom.size(), static_cast<Eigen::Index>(sub.paths.size()));
    for (std::size_t i = 0; i < sub.paths.size(); ++i) {
        const Subpath& p = sub.paths[i];
        const double az = rx_end ? p.aoa_az : p.aod_az;
        const double el = rx_end ? p.aoa_el : p.aod_el;
        a.col(static_cast<Eigen::Index>(i)) = std::sqrt(p.power) * array_response(geom, az, el);
    }
    return a;
}

ChannelMatrix channel_matrix(const SubpathSet& sub, const std::vector<cplx>& gains, const ArrayGeometry& rx,
                             const ArrayGeometry& tx, double t, double f_dmax) {
    require(gains.size() == sub.paths.size(), "one small-scale gain per subpath required");
    ChannelMatrix out;
    out.t = t;
    out.f_dmax = f_dmax;
    out.h = CMatrix::Zero(rx.size(), tx.size());
    for (std::size_t i = 0; i < sub.paths.size(); ++i) {
        const Subpath& p = sub.paths[i];
        const cplx g = gains[i] * std::polar(1.0, 2.0 * kPi * t * f_dmax * std::cos(p.doppler_angle));
        const CVector ur = array_response(rx, p.aoa_az, p.aoa_el);
        const CVector ut = array_response(tx, p.aod_az, p.aod_el);
        out.h.noalias() += (g * ur) * ut.adjoint();
    }
    return out;
}

ChannelMatrix channel_matrix(const SubpathSet& sub, const ArrayGeometry& rx, const ArrayGeometry& tx, double t,
                             double f_dmax, Rng& rng) {
    return channel_matrix(sub, draw_small_scale(sub, rng), rx, tx, t, f_dmax);
}

SpatialCovariancePair covariances(const SubpathSet& sub, const ArrayGeometry& rx, const ArrayGeometry& tx) {
    const CMatrix a_rx = steering_factor(sub, rx, true);
    const CMatrix a_tx = steering_factor(sub, tx, false);
    SpatialCovariancePair cov;
    cov.q_rx = a_rx * a_rx.adjoint();
    cov.q_tx = a_tx * a_tx.adjoint();
    return cov;
}

double eigen_gain_db(const CMatrix& q) {
    const double tr = trace_real(q);
    if (!(tr > 0.0)) fail(ErrorCode::Degenerate, "degenerate covariance");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(q, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues()(es.eigenvalues().size() - 1);
    return 10.0 * std::log10(lmax / (tr / static_cast<double>(q.rows())));
}

BfGain bf_gain_long_term(const SpatialCovariancePair& cov) {
    BfGain g;
    g.gain_rx = eigen_gain_db(cov.q_rx);
    g.gain_tx = eigen_gain_db(cov.q_tx);
    g.total = g.gain_rx + g.gain_tx;
    return g;
}

double bf_gain_instantaneous(const ChannelMatrix& hm) {
    const CMatrix& h = hm.h;
    const double fro2 = h.squaredNorm();
    if (!(fro2 > 0.0)) fail(ErrorCode::Degenerate, "zero channel matrix");
    Eigen::JacobiSVD<CMatrix> svd(h);
    const double smax = svd.singularValues()(0);
    const double omni = fro2 / static_cast<double>(h.rows() * h.cols());
    return 10.0 * std::log10(smax * smax / omni);
}

void normalize_phase(CVector& v) {
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-9 * peak) {
            v *= std::conj(v(i)) / std::abs(v(i));
            return;
        }
    }
}

DominantEigen dominant_eigen(const CMatrix& q) {
    if (!(trace_real(q) > 0.0)) fail(ErrorCode::Degenerate, "degenerate covariance");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(q);
    const Eigen::Index last = q.rows() - 1;
    DominantEigen d;
    d.value = es.eigenvalues()(last);
    d.vector = es.eigenvectors().col(last);
    d.vector.normalize();
    normalize_phase(d.vector);
    return d;
}

DominantEigen dominant_eigen_of_factor(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    const Eigen::Index m = a.cols();
    const double scale = a.squaredNorm();
    if (!(scale > 0.0)) fail(ErrorCode::Degenerate, "degenerate covariance");

    // Lanczos on A A^H with full reorthogonalization. The Krylov space is
    // exhausted after rank(A) steps, so the loop always terminates exactly.
    const Eigen::Index kmax = std::min(n, m);
    Rng start_rng(0x5EED);
    CVector w0(m);
    for (Eigen::Index i = 0; i < m; ++i) w0(i) = cplx(start_rng.normal(), start_rng.normal());
    CVector v = a * w0;
    if (!(v.squaredNorm() > 0.0)) v = a.col(0);
    v.normalize();

    CMatrix basis(n, kmax);
    std::vector<double> alpha, beta;
    alpha.reserve(static_cast<std::size_t>(kmax));
    beta.reserve(static_cast<std::size_t>(kmax));
    Eigen::VectorXd ritz;
    double theta = 0.0;
    Eigen::Index used = 0;
    for (Eigen::Index j = 0; j < kmax; ++j) {
        basis.col(j) = v;
        used = j + 1;
        CVector w = a * (a.adjoint() * v);
        alpha.push_back((v.adjoint() * w)(0).real());
        for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(used) * (basis.leftCols(used).adjoint() * w);
        const double b = w.norm();

        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(used, used);
        for (Eigen::Index i = 0; i < used; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < used) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        theta = es.eigenvalues()(used - 1);
        ritz = es.eigenvectors().col(used - 1);
        const double residual = b * std::abs(ritz(used - 1));
        if (residual <= 1e-13 * theta || b <= 1e-14 * scale) break;
        beta.push_back(b);
        v = w / b;
    }
    DominantEigen d;
    d.value = theta;
    d.vector = basis.leftCols(used) * ritz.cast<cplx>();
    d.vector.normalize();
    normalize_phase(d.vector);
    return d;
}

Eigen::VectorXd eigenvalues_of_factor(const CMatrix& a) {
    const CMatrix g = a.cols() < a.rows() ? CMatrix(a.adjoint() * a) : CMatrix(a * a.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(g, Eigen::EigenvaluesOnly);
    return descending(es.eigenvalues());
}

BeamPair beamforming_vectors(const SpatialCovariancePair& cov) {
    return {dominant_eigen(cov.q_rx).vector, dominant_eigen(cov.q_tx).vector};
}

double expected_link_gain(const CVector& v_rx, const CVector& v_tx, const SpatialCovariancePair& cov) {
    require(v_rx.size() == cov.q_rx.rows() && v_tx.size() == cov.q_tx.rows(),
            "beamforming vector dimension mismatch");
    const double tr = trace_real(cov.q_rx);
    if (!(tr > 0.0)) fail(ErrorCode::Degenerate, "degenerate covariance");
    const double grx = (v_rx.adjoint() * cov.q_rx * v_rx)(0).real();
    const double gtx = (v_tx.adjoint() * cov.q_tx * v_tx)(0).real();
    return grx * gtx / tr;
}

double factor_quadratic(const CMatrix& a, const CVector& v) { return (a.adjoint() * v).squaredNorm(); }

double power_fraction_from_eigenvalues(const Eigen::VectorXd& rx_desc, const Eigen::VectorXd& tx_desc, int r) {
    auto mass = [r](const Eigen::VectorXd& ev) {
        const double total = ev.sum();
        if (!(total > 0.0)) fail(ErrorCode::Degenerate, "degenerate covariance");
        const Eigen::Index n = std::min<Eigen::Index>(r, ev.size());
        return std::min(1.0, ev.head(n).sum() / total);
    };
    return mass(rx_desc) * mass(tx_desc);
}

double power_fraction(const SpatialCovariancePair& cov, int r) {
    const auto n = std::min(cov.q_rx.rows(), cov.q_tx.rows());
    require(r >= 1 && r <= n, "rank must lie in [1, min(n_rx, n_tx)]");
    Eigen::SelfAdjointEigenSolver<CMatrix> erx(cov.q_rx, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<CMatrix> etx(cov.q_tx, Eigen::EigenvaluesOnly);
    return power_fraction_from_eigenvalues(descending(erx.eigenvalues()), descending(etx.eigenvalues()), r);
}

namespace {

void put_le(std::ostream& os, double x) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t swapped = 0;
        for (int i = 0; i < 8; ++i) swapped |= ((bits >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        bits = swapped;
    }
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
}

double get_le(std::istream& is) {
    char buf[8];
    if (!is.read(buf, 8)) fail(ErrorCode::Io, "truncated matrix dump");
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t swapped = 0;
        for (int i = 0; i < 8; ++i) swapped |= ((bits >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        bits = swapped;
    }
    return std::bit_cast<double>(bits);
}

}  // namespace

void write_matrix_binary(const std::string& path, const CMatrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::Io, "cannot open " + path);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            put_le(os, m(r, c).real());
            put_le(os, m(r, c).imag());
        }
    if (!os) fail(ErrorCode::Io, "write failed: " + path);
}

CMatrix read_matrix_binary(const std::string& path, int rows, int cols) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::Io, "cannot open " + path);
    CMatrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double re = get_le(is);
            const double im = get_le(is);
            m(r, c) = cplx(re, im);
        }
    if (is.peek() != std::char_traits<char>::eof()) fail(ErrorCode::Io, "matrix dump larger than expected: " + path);
    return m;
}

void write_matrix_csv(const std::string& path, const CMatrix& m) {
    std::ofstream os(path);
    if (!os) fail(ErrorCode::Io, "cannot open " + path);
    os.precision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) os << ',';
            os << m(r, c).real() << ',' << m(r, c).imag();
        }
        os << '\n';
    }
}

}  // namespace mmw
