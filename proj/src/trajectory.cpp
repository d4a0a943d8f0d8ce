#include "sticky/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sticky/error.hpp"

namespace sticky {

cplx ExpSum::eval_complex(double t) const {
    cplx acc = constant;
    for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * std::exp(rates[i] * t);
    return acc;
}

double ExpSum::derivative(double t) const {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * rates[i] * std::exp(rates[i] * t);
    return acc.real();
}

ExpSum ExpSum::scaled(double k) const {
    ExpSum out = *this;
    out.constant *= k;
    for (auto& a : out.coeffs) a *= k;
    return out;
}

cplx discounted_product(const ExpSum& f, const ExpSum& g, double rho) {
    // Both factors expanded with a rate-0 term for the constant.
    std::vector<cplx> fa{f.constant};
    std::vector<cplx> fr{0.0};
    std::vector<cplx> ga{g.constant};
    std::vector<cplx> gr{0.0};
    fa.insert(fa.end(), f.coeffs.begin(), f.coeffs.end());
    fr.insert(fr.end(), f.rates.begin(), f.rates.end());
    ga.insert(ga.end(), g.coeffs.begin(), g.coeffs.end());
    gr.insert(gr.end(), g.rates.begin(), g.rates.end());
    cplx total = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        for (std::size_t j = 0; j < ga.size(); ++j) {
            const cplx denom = rho - fr[i] - gr[j];
            if (!(denom.real() > 0.0)) {
                throw Error(ErrorCode::InternalError, "discounted_product diverges: rho <= Re(rate sum)");
            }
            total += fa[i] * ga[j] / denom;
        }
    }
    return total;
}

Eigen::VectorXcd ModalTrajectory::eval_complex(double t) const {
    Eigen::VectorXcd x = z.cast<cplx>();
    for (std::size_t i = 0; i < coeffs.size(); ++i) x += coeffs[i] * std::exp(rates[i] * t) * vectors[i];
    return x;
}

ExpSum ModalTrajectory::component(Eigen::Index k) const {
    ExpSum e;
    e.constant = z[k];
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        e.coeffs.push_back(coeffs[i] * vectors[i][k]);
        e.rates.push_back(rates[i]);
    }
    return e;
}

double ModalTrajectory::imag_residue(double t_end, int samples) const {
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = t_end * static_cast<double>(k) / static_cast<double>(std::max(1, samples - 1));
        worst = std::max(worst, eval_complex(t).imag().cwiseAbs().maxCoeff());
    }
    return worst;
}

double SampledPath::operator()(double t) const {
    if (values.empty()) return tail;
    if (t <= 0.0) return values.front();
    const double x = t / h;
    const auto last = values.size() - 1;
    if (x >= static_cast<double>(last)) return t > t_end() ? tail : values.back();
    const auto k = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(k);
    return values[k] + frac * (values[k + 1] - values[k]);
}

double ScalarPath::operator()(double t) const {
    if (const auto* e = std::get_if<ExpSum>(&repr_)) return (*e)(t);
    if (const auto* s = std::get_if<SampledPath>(&repr_)) return (*s)(t);
    return 0.0;
}

ScalarPath ScalarPath::scaled(double k) const {
    if (const auto* e = std::get_if<ExpSum>(&repr_)) return ScalarPath(e->scaled(k));
    if (const auto* s = std::get_if<SampledPath>(&repr_)) {
        SampledPath out = *s;
        for (auto& v : out.values) v *= k;
        out.tail *= k;
        return ScalarPath(std::move(out));
    }
    return {};
}

std::vector<double> ScalarPath::sample(double h, std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = (*this)(h * static_cast<double>(k));
    return out;
}

double discounted_quadrature(const ScalarPath& f, const ScalarPath& g, double rho, double rel_tol) {
    auto integrand = [&](double t) { return std::exp(-rho * t) * f(t) * g(t); };
    using boost::math::quadrature::gauss_kronrod;
    double err = 0.0;
    // Sampled paths have kinks at grid nodes; integrate the grid span in
    // unit pieces and only map the smooth tail to infinity.
    double t_split = 0.0;
    if (const auto* s = f.sampled()) t_split = std::max(t_split, s->t_end());
    if (const auto* s = g.sampled()) t_split = std::max(t_split, s->t_end());
    double total = 0.0;
    if (t_split > 0.0) {
        double h = 0.0;
        if (const auto* s = f.sampled()) h = s->h;
        if (const auto* s = g.sampled()) h = (h == 0.0) ? s->h : std::min(h, s->h);
        const auto pieces = static_cast<std::size_t>(std::llround(t_split / h));
        for (std::size_t k = 0; k < pieces; ++k) {
            const double a = h * static_cast<double>(k);
            total += gauss_kronrod<double, 15>::integrate(integrand, a, a + h, 0, rel_tol, &err);
        }
    }
    total += gauss_kronrod<double, 61>::integrate(integrand, t_split, std::numeric_limits<double>::infinity(), 15,
                                                  rel_tol, &err);
    return total;
}

}  // namespace sticky
