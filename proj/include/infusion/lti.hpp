#pragma once

#include <complex>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Continuous-time SISO linear models. Time is in minutes everywhere in this
// library, so frequencies are rad/min.
namespace infusion::lti {

/// Time unit shared by every model, trace, and configuration field.
inline constexpr const char* kTimeUnit = "min";

class LtiError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Transfer function whose dc gain is infinite (pole at the origin).
class InfiniteDcGainError : public LtiError {
  public:
    using LtiError::LtiError;
};

/// Feedback loop whose return difference polynomial vanishes identically.
class DegenerateLoopError : public LtiError {
  public:
    using LtiError::LtiError;
};

/// Evaluation exactly on a pole.
class PoleEvaluationError : public LtiError {
  public:
    using LtiError::LtiError;
};

/**
 * Real polynomial, coefficients ordered highest degree first.
 *
 * Coefficients are stored verbatim; normalization to a monic polynomial only
 * happens through normalized(). The zero polynomial is the single coefficient
 * {0}.
 */
class Polynomial {
  public:
    Polynomial() : coeffs_{0.0} {}
    Polynomial(std::initializer_list<double> coeffs);
    explicit Polynomial(std::vector<double> coeffs);

    static Polynomial constant(double c) { return Polynomial(std::vector<double>{c}); }
    /// s^n
    static Polynomial monomial(std::size_t n);

    const std::vector<double>& coefficients() const { return coeffs_; }
    std::size_t degree() const { return coeffs_.size() - 1; }
    double leading() const { return coeffs_.front(); }
    /// Value at s = 0.
    double constant_term() const { return coeffs_.back(); }
    bool is_zero() const;

    std::complex<double> operator()(std::complex<double> s) const;
    double operator()(double s) const;

    Polynomial normalized() const;
    Polynomial scaled(double k) const;

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

  private:
    void strip_leading_zeros();

    std::vector<double> coeffs_;
};

/// Rational SISO model num(s)/den(s).
class TransferFunction {
  public:
    TransferFunction() : num_(Polynomial::constant(1.0)), den_(Polynomial::constant(1.0)) {}
    TransferFunction(Polynomial num, Polynomial den);

    static TransferFunction gain(double k) {
        return {Polynomial::constant(k), Polynomial::constant(1.0)};
    }

    const Polynomial& num() const { return num_; }
    const Polynomial& den() const { return den_; }

    bool is_proper() const { return num_.degree() <= den_.degree(); }
    bool is_strictly_proper() const { return num_.degree() < den_.degree(); }

    std::complex<double> operator()(std::complex<double> s) const;

    /// Both polynomials divided by the leading denominator coefficient.
    TransferFunction normalized() const;

    friend bool operator==(const TransferFunction& a, const TransferFunction& b) = default;

  private:
    Polynomial num_;
    Polynomial den_;
};

struct StateSpaceModel {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;

    std::size_t order() const { return static_cast<std::size_t>(A.rows()); }
    std::complex<double> response(std::complex<double> s) const;
};

struct FrequencyPoint {
    double omega = 0.0;     // rad/min
    double magnitude = 0.0; // absolute value
    double phase_deg = 0.0;
};

double tf_dc_gain(const TransferFunction& tf);

/// Controllable canonical realization; biproper models split into D plus a
/// strictly proper remainder.
StateSpaceModel tf_to_state_space(const TransferFunction& tf);

TransferFunction tf_series(const TransferFunction& a, const TransferFunction& b);
TransferFunction tf_parallel(const TransferFunction& a, const TransferFunction& b);
/// Negative feedback forward/(1 + forward*feedback). No pole-zero cancellation.
TransferFunction tf_feedback(const TransferFunction& forward, const TransferFunction& feedback);

FrequencyPoint frequency_response(const TransferFunction& tf, double omega);

/// Routh-Hurwitz test: true iff every root has strictly negative real part.
bool is_hurwitz(const Polynomial& p);

/// n points log-spaced over [lo, hi], endpoints included.
std::vector<double> logspace(double lo, double hi, std::size_t n);

} // namespace infusion::lti
