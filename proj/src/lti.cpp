#include "infusion/lti.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace infusion::lti {

Polynomial::Polynomial(std::initializer_list<double> coeffs)
    : Polynomial(std::vector<double>(coeffs)) {}

Polynomial::Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) {
        throw LtiError("polynomial needs at least one coefficient");
    }
    for (double c : coeffs_) {
        if (!std::isfinite(c)) {
            throw LtiError("polynomial coefficient is not finite");
        }
    }
    strip_leading_zeros();
}

Polynomial Polynomial::monomial(std::size_t n) {
    std::vector<double> c(n + 1, 0.0);
    c.front() = 1.0;
    return Polynomial(std::move(c));
}

void Polynomial::strip_leading_zeros() {
    auto first = std::find_if(coeffs_.begin(), coeffs_.end(), [](double c) { return c != 0.0; });
    if (first == coeffs_.end()) {
        coeffs_.assign(1, 0.0);
        return;
    }
    coeffs_.erase(coeffs_.begin(), first);
}

bool Polynomial::is_zero() const {
    return coeffs_.size() == 1 && coeffs_.front() == 0.0;
}

std::complex<double> Polynomial::operator()(std::complex<double> s) const {
    std::complex<double> acc = 0.0;
    for (double c : coeffs_) {
        acc = acc * s + c;
    }
    return acc;
}

double Polynomial::operator()(double s) const {
    double acc = 0.0;
    for (double c : coeffs_) {
        acc = acc * s + c;
    }
    return acc;
}

Polynomial Polynomial::normalized() const {
    if (is_zero()) {
        throw LtiError("cannot normalize the zero polynomial");
    }
    return scaled(1.0 / coeffs_.front());
}

Polynomial Polynomial::scaled(double k) const {
    std::vector<double> c = coeffs_;
    for (double& x : c) {
        x *= k;
    }
    return Polynomial(std::move(c));
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    const auto& x = a.coeffs_;
    const auto& y = b.coeffs_;
    std::vector<double> out(std::max(x.size(), y.size()), 0.0);
    // align on the constant term
    std::size_t ox = out.size() - x.size();
    std::size_t oy = out.size() - y.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[ox + i] += x[i];
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        out[oy + i] += y[i];
    }
    return Polynomial(std::move(out));
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    const auto& x = a.coeffs_;
    const auto& y = b.coeffs_;
    std::vector<double> out(x.size() + y.size() - 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            out[i + j] += x[i] * y[j];
        }
    }
    return Polynomial(std::move(out));
}

TransferFunction::TransferFunction(Polynomial num, Polynomial den)
    : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) {
        throw LtiError("transfer function denominator is the zero polynomial");
    }
}

std::complex<double> TransferFunction::operator()(std::complex<double> s) const {
    const std::complex<double> d = den_(s);
    if (d == 0.0) {
        throw PoleEvaluationError("transfer function evaluated on a pole");
    }
    return num_(s) / d;
}

TransferFunction TransferFunction::normalized() const {
    const double k = 1.0 / den_.leading();
    return {num_.scaled(k), den_.scaled(k)};
}

std::complex<double> StateSpaceModel::response(std::complex<double> s) const {
    const auto n = A.rows();
    if (n == 0) {
        return D;
    }
    Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    Eigen::VectorXcd x = M.partialPivLu().solve(B.cast<std::complex<double>>());
    return (C.cast<std::complex<double>>() * x)(0) + D;
}

double tf_dc_gain(const TransferFunction& tf) {
    const double d = tf.den().constant_term();
    if (d == 0.0) {
        throw InfiniteDcGainError("infinite dc gain: pole at the origin");
    }
    return tf.num().constant_term() / d;
}

StateSpaceModel tf_to_state_space(const TransferFunction& tf) {
    if (!tf.is_proper()) {
        throw LtiError("cannot realize an improper transfer function");
    }
    const TransferFunction monic = tf.normalized();
    const auto& den = monic.den().coefficients();
    const std::size_t n = monic.den().degree();

    // pad numerator to n+1 coefficients, then peel off the direct term
    std::vector<double> num(n + 1, 0.0);
    const auto& raw = monic.num().coefficients();
    std::copy(raw.begin(), raw.end(), num.begin() + static_cast<std::ptrdiff_t>(n + 1 - raw.size()));
    const double d = num[0];

    StateSpaceModel ss;
    ss.D = d;
    ss.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    ss.B = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    ss.C = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
    if (n == 0) {
        return ss;
    }
    for (std::size_t j = 0; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        ss.A(0, jj) = -den[j + 1];
        ss.C(jj) = num[j + 1] - d * den[j + 1];
        if (j + 1 < n) {
            ss.A(jj + 1, jj) = 1.0;
        }
    }
    ss.B(0) = 1.0;
    return ss;
}

TransferFunction tf_series(const TransferFunction& a, const TransferFunction& b) {
    return {a.num() * b.num(), a.den() * b.den()};
}

TransferFunction tf_parallel(const TransferFunction& a, const TransferFunction& b) {
    return {a.num() * b.den() + b.num() * a.den(), a.den() * b.den()};
}

TransferFunction tf_feedback(const TransferFunction& forward, const TransferFunction& feedback) {
    Polynomial return_difference =
        forward.den() * feedback.den() + forward.num() * feedback.num();
    if (return_difference.is_zero()) {
        throw DegenerateLoopError("degenerate loop: return difference is identically zero");
    }
    return {forward.num() * feedback.den(), std::move(return_difference)};
}

FrequencyPoint frequency_response(const TransferFunction& tf, double omega) {
    if (!(omega > 0.0)) {
        throw LtiError("frequency must be positive");
    }
    const std::complex<double> h = tf(std::complex<double>(0.0, omega));
    return {omega, std::abs(h), std::arg(h) * 180.0 / std::numbers::pi};
}

bool is_hurwitz(const Polynomial& p) {
    if (p.is_zero()) {
        throw LtiError("is_hurwitz: zero polynomial");
    }
    if (p.degree() == 0) {
        throw LtiError("is_hurwitz: polynomial must have degree >= 1");
    }
    const auto& c = p.coefficients();
    const double sign = c.front() > 0.0 ? 1.0 : -1.0;
    // necessary condition: all coefficients nonzero with a common sign
    for (double x : c) {
        if (!(sign * x > 0.0)) {
            return false;
        }
    }

    const std::size_t n = p.degree();
    const std::size_t width = n / 2 + 1;
    std::vector<double> upper(width, 0.0);
    std::vector<double> lower(width, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
        (i % 2 == 0 ? upper : lower)[i / 2] = sign * c[i];
    }

    bool zero_pivot = false;
    double previous_pivot = upper[0];
    for (std::size_t row = 1; row <= n; ++row) {
        double row_max = 0.0;
        for (double x : lower) {
            row_max = std::max(row_max, std::abs(x));
        }
        if (row_max == 0.0) {
            // all-zero row: roots symmetric about the origin
            return false;
        }
        const double eps = 1e-12 * row_max;
        if (std::abs(lower[0]) <= eps) {
            lower[0] = eps;
            zero_pivot = true;
        }
        if ((lower[0] > 0.0) != (previous_pivot > 0.0)) {
            return false;
        }
        previous_pivot = lower[0];

        std::vector<double> next(width, 0.0);
        for (std::size_t j = 0; j + 1 < width; ++j) {
            next[j] = (lower[0] * upper[j + 1] - upper[0] * lower[j + 1]) / lower[0];
        }
        upper = std::move(lower);
        lower = std::move(next);
    }
    // a substituted pivot without sign change means roots on the imaginary axis
    return !zero_pivot;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
    if (n < 2 || !(lo > 0.0) || !(hi > lo)) {
        throw LtiError("logspace needs n >= 2 and 0 < lo < hi");
    }
    std::vector<double> out(n);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return out;
}

} // namespace infusion::lti
