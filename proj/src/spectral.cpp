#include "sticky/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sticky/error.hpp"

namespace sticky {

std::vector<double> char_poly(const Eigen::MatrixXd& m) {
    const auto n = m.rows();
    if (n != m.cols()) {
        throw Error(ErrorCode::InternalError, "char_poly needs a square matrix");
    }
    if (n > 8) {
        throw Error(ErrorCode::InternalError, "char_poly supports n <= 8");
    }
    std::vector<double> coeffs(static_cast<std::size_t>(n) + 1, 0.0);
    coeffs[0] = 1.0;
    Eigen::MatrixXd mk = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        mk = m * mk + coeffs[static_cast<std::size_t>(k - 1)] * id;
        coeffs[static_cast<std::size_t>(k)] = -(m * mk).trace() / static_cast<double>(k);
    }
    return coeffs;
}

cplx poly_eval(std::span<const double> coeffs, cplx z) {
    cplx acc = 0.0;
    for (double a : coeffs) acc = acc * z + a;
    return acc;
}

RouthVerdict routh_count(std::span<const double> coeffs) {
    if (coeffs.empty() || coeffs.front() == 0.0) {
        throw Error(ErrorCode::InternalError, "routh_count needs a nonzero leading coefficient");
    }
    const std::size_t degree = coeffs.size() - 1;
    RouthVerdict out;
    if (degree == 0) {
        out.first_column = {coeffs[0]};
        return out;
    }
    double scale = 0.0;
    for (double a : coeffs) scale = std::max(scale, std::abs(a));
    const double eps = 1e-9 * scale;
    const double vanish = 1e-12 * scale;

    const std::size_t width = degree / 2 + 1;
    std::vector<double> prev(width + 1, 0.0);
    std::vector<double> cur(width + 1, 0.0);
    for (std::size_t j = 0; 2 * j < coeffs.size(); ++j) prev[j] = coeffs[2 * j];
    for (std::size_t j = 0; 2 * j + 1 < coeffs.size(); ++j) cur[j] = coeffs[2 * j + 1];

    out.first_column.push_back(prev[0]);
    for (std::size_t row = 1; row <= degree; ++row) {
        bool all_zero = true;
        for (double v : cur) all_zero = all_zero && std::abs(v) <= vanish;
        if (all_zero) {
            throw Error(ErrorCode::ImaginaryAxisRoot, "Routh row vanishes: roots on or symmetric about the imaginary axis");
        }
        if (std::abs(cur[0]) <= vanish) cur[0] = eps;
        out.first_column.push_back(cur[0]);
        std::vector<double> next(width + 1, 0.0);
        for (std::size_t j = 0; j < width; ++j) {
            next[j] = (cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0];
        }
        prev = cur;
        cur = next;
    }
    for (std::size_t i = 1; i < out.first_column.size(); ++i) {
        if ((out.first_column[i] > 0.0) != (out.first_column[i - 1] > 0.0)) ++out.sign_changes;
    }
    out.unstable_count = out.sign_changes;
    out.stable_count = static_cast<int>(degree) - out.unstable_count;
    return out;
}

std::vector<cplx> polynomial_roots(std::span<const double> coeffs) {
    if (coeffs.empty() || coeffs.front() == 0.0) {
        throw Error(ErrorCode::InternalError, "polynomial_roots needs a nonzero leading coefficient");
    }
    const auto n = static_cast<Eigen::Index>(coeffs.size() - 1);
    if (n == 0) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        companion(0, j) = -coeffs[static_cast<std::size_t>(j + 1)] / coeffs[0];
    }
    for (Eigen::Index i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::InternalError, "companion eigenvalue iteration failed");
    }
    std::vector<double> deriv;
    for (std::size_t k = 0; k + 1 < coeffs.size(); ++k) {
        deriv.push_back(coeffs[k] * static_cast<double>(coeffs.size() - 1 - k));
    }
    std::vector<cplx> roots;
    for (Eigen::Index i = 0; i < n; ++i) {
        cplx z = solver.eigenvalues()[i];
        for (int it = 0; it < 4; ++it) {
            const cplx d = poly_eval(deriv, z);
            if (std::abs(d) == 0.0) break;
            const cplx step = poly_eval(coeffs, z) / d;
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
            if (std::abs(step) > 1e-6 * (1.0 + std::abs(z))) break;
            z -= step;
        }
        roots.push_back(z);
    }
    return roots;
}

std::vector<std::size_t> SpectralData::stable_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        if (eigenvalues[i].real() < 0.0) idx.push_back(i);
    }
    return idx;
}

std::vector<Eigen::VectorXcd> SpectralData::stable_vectors() const {
    std::vector<Eigen::VectorXcd> out;
    for (auto i : stable_indices()) out.push_back(eigenvectors[i]);
    return out;
}

std::vector<cplx> SpectralData::stable_values() const {
    std::vector<cplx> out;
    for (auto i : stable_indices()) out.push_back(eigenvalues[i]);
    return out;
}

double SpectralData::max_residual() const {
    const Eigen::MatrixXcd mc = matrix.cast<cplx>();
    double worst = 0.0;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        worst = std::max(worst, (mc * eigenvectors[i] - eigenvalues[i] * eigenvectors[i]).norm());
    }
    return worst;
}

Eigen::VectorXcd normalize_eigenvector(const Eigen::VectorXcd& v, double floor) {
    Eigen::VectorXcd x = v / v.norm();
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (std::abs(x[k]) > floor) {
            x *= std::conj(x[k]) / std::abs(x[k]);
            x[k] = std::abs(x[k]);
            break;
        }
    }
    return x;
}

namespace {

Eigen::VectorXcd inverse_iteration(const Eigen::MatrixXcd& mc, cplx lambda, double shift) {
    const auto n = mc.rows();
    const Eigen::MatrixXcd shifted = mc - (lambda + cplx(shift, 0.5 * shift)) * Eigen::MatrixXcd::Identity(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(shifted);
    Eigen::VectorXcd x(n);
    for (Eigen::Index k = 0; k < n; ++k) x[k] = cplx(1.0 / (static_cast<double>(k) + 1.3), 0.1 * static_cast<double>(k));
    x.normalize();
    for (int it = 0; it < 4; ++it) {
        x = lu.solve(x);
        x.normalize();
    }
    return x;
}

}  // namespace

SpectralData eigendecompose(const Eigen::MatrixXd& m, SpectralTolerances tol) {
    if (m.rows() != m.cols() || m.rows() == 0 || m.rows() > 8) {
        throw Error(ErrorCode::InternalError, "eigendecompose needs a square matrix with 1 <= n <= 8");
    }
    if (!m.allFinite()) {
        throw Error(ErrorCode::NonfiniteParameter, "matrix has non-finite entries");
    }
    const double norm = m.norm();
    const double scale = std::max(1.0, norm);
    const auto coeffs = char_poly(m);
    auto roots = polynomial_roots(coeffs);

    // Real roots come out with roundoff imaginary parts; pair the rest.
    for (auto& z : roots) {
        if (std::abs(z.imag()) <= 1e-10 * scale) z = {z.real(), 0.0};
    }
    std::vector<cplx> upper;
    std::vector<cplx> reals;
    for (const auto& z : roots) {
        if (z.imag() > 0.0) {
            upper.push_back(z);
        } else if (z.imag() == 0.0) {
            reals.push_back(z);
        }
    }
    const std::size_t lower_count =
        static_cast<std::size_t>(std::count_if(roots.begin(), roots.end(), [](cplx z) { return z.imag() < 0.0; }));
    if (lower_count != upper.size()) {
        throw Error(ErrorCode::InternalError, "complex roots failed to pair");
    }
    std::vector<cplx> values = reals;
    for (const auto& z : upper) {
        values.push_back(z);
        values.push_back(std::conj(z));
    }
    std::sort(values.begin(), values.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t j = i + 1; j < values.size(); ++j) {
            if (std::abs(values[i] - values[j]) < tol.gap * scale) {
                std::ostringstream os;
                os << "eigenvalues " << values[i] << " and " << values[j] << " coincide";
                throw Error(ErrorCode::DegenerateSpectrum, os.str());
            }
        }
    }
    // A repeated root is split by roundoff into a cluster wider than the gap
    // test; its conditioning gives it away.
    const std::size_t degree = coeffs.size() - 1;
    std::vector<double> deriv(degree);
    for (std::size_t k = 0; k < degree; ++k) deriv[k] = coeffs[k] * static_cast<double>(degree - k);
    for (const auto& lambda : values) {
        double size = 0.0;
        for (std::size_t k = 0; k <= degree; ++k) {
            size += std::abs(coeffs[k]) * std::pow(std::abs(lambda), static_cast<double>(degree - k));
        }
        const double slope = std::abs(poly_eval(deriv, lambda));
        if (std::numeric_limits<double>::epsilon() * size > tol.gap * scale * slope) {
            std::ostringstream os;
            os << "eigenvalue " << lambda << " is numerically repeated";
            throw Error(ErrorCode::DegenerateSpectrum, os.str());
        }
    }

    SpectralData out;
    out.matrix = m;
    out.eigenvalues = values;
    const Eigen::MatrixXcd mc = m.cast<cplx>();
    const double shift = 1e-10 * scale;
    for (const auto& lambda : values) {
        Eigen::VectorXcd v;
        if (lambda.imag() < 0.0) {
            v = normalize_eigenvector(inverse_iteration(mc, std::conj(lambda), shift)).conjugate();
        } else {
            v = normalize_eigenvector(inverse_iteration(mc, lambda, shift));
            if (lambda.imag() == 0.0) v = normalize_eigenvector(v.real().cast<cplx>());
        }
        const double res = (mc * v - lambda * v).norm();
        if (!(res <= tol.residual * scale)) {
            std::ostringstream os;
            os << "eigenvector residual " << res << " exceeds tolerance for eigenvalue " << lambda;
            throw Error(ErrorCode::InternalError, os.str());
        }
        out.eigenvectors.push_back(v);
        if (lambda.real() < 0.0) ++out.stable_count;
    }
    return out;
}

std::vector<cplx> boundary_solve(std::span<const Eigen::VectorXcd> vectors, std::span<const int> selector,
                                 const Eigen::VectorXd& target, double tol) {
    const auto k = static_cast<Eigen::Index>(vectors.size());
    if (static_cast<Eigen::Index>(selector.size()) != k || target.size() != k) {
        throw Error(ErrorCode::InternalError, "boundary_solve size mismatch");
    }
    Eigen::MatrixXcd a(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index i = 0; i < k; ++i) {
            a(i, j) = vectors[static_cast<std::size_t>(j)][selector[static_cast<std::size_t>(i)]];
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
    const auto& sv = svd.singularValues();
    if (k > 0 && !(sv[k - 1] > 1e-10 * std::max(1e-300, sv[0]))) {
        std::ostringstream os;
        os << "restricted stable vectors are linearly dependent (singular values " << sv.transpose() << ")";
        throw Error(ErrorCode::SingularBoundary, os.str());
    }
    Eigen::VectorXcd x = a.fullPivLu().solve(target.cast<cplx>());
    std::vector<cplx> coeffs(x.data(), x.data() + k);

    // Enforce exact conjugate symmetry so reconstructed paths are real.
    std::vector<bool> done(static_cast<std::size_t>(k), false);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (done[i]) continue;
        const auto& vi = vectors[i];
        if (vi.imag().norm() <= 1e-12 * vi.norm()) {
            coeffs[i] = coeffs[i].real();
            done[i] = true;
            continue;
        }
        for (std::size_t j = i + 1; j < coeffs.size(); ++j) {
            if (!done[j] && (vi - vectors[j].conjugate()).norm() <= 1e-12 * vi.norm()) {
                const cplx avg = 0.5 * (coeffs[i] + std::conj(coeffs[j]));
                coeffs[i] = avg;
                coeffs[j] = std::conj(avg);
                done[i] = done[j] = true;
                break;
            }
        }
    }
    Eigen::VectorXcd recon = Eigen::VectorXcd::Zero(k);
    for (Eigen::Index j = 0; j < k; ++j) recon += coeffs[static_cast<std::size_t>(j)] * a.col(j);
    const double res = (recon - target.cast<cplx>()).norm();
    if (!(res <= tol * std::max(1.0, target.norm()))) {
        std::ostringstream os;
        os << "boundary residual " << res << " exceeds tolerance";
        throw Error(ErrorCode::SingularBoundary, os.str());
    }
    return coeffs;
}

}  // namespace sticky
