#include "infusion/frac.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace infusion::frac {

using lti::Polynomial;
using lti::TransferFunction;

void OraConfig::validate() const {
    if (order_n < 1) {
        throw FracError("ORA order N must be >= 1");
    }
    if (!(omega_b > 0.0) || !(omega_h > omega_b)) {
        throw FracError("ORA band must satisfy 0 < omega_b < omega_h");
    }
}

OraFactors ora_factors(double gamma, const OraConfig& cfg) {
    cfg.validate();
    if (!(gamma > -1.0 && gamma < 1.0)) {
        throw FracError("ORA exponent must lie in (-1, 1); decompose it first");
    }
    const int n = cfg.order_n;
    const double ratio = cfg.omega_h / cfg.omega_b;
    const double span = 2.0 * n + 1.0;

    OraFactors f;
    f.gain = std::pow(cfg.omega_h, gamma);
    for (int k = -n; k <= n; ++k) {
        f.poles.push_back(cfg.omega_b * std::pow(ratio, (k + n + (1.0 + gamma) / 2.0) / span));
        f.zeros.push_back(cfg.omega_b * std::pow(ratio, (k + n + (1.0 - gamma) / 2.0) / span));
    }
    return f;
}

TransferFunction ora_approximate(double gamma, const OraConfig& cfg) {
    const OraFactors f = ora_factors(gamma, cfg);
    if (gamma == 0.0) {
        return TransferFunction::gain(1.0);
    }
    Polynomial num = Polynomial::constant(f.gain);
    Polynomial den = Polynomial::constant(1.0);
    for (std::size_t i = 0; i < f.poles.size(); ++i) {
        num = num * Polynomial{1.0, f.zeros[i]};
        den = den * Polynomial{1.0, f.poles[i]};
    }
    return {num, den};
}

ExponentSplit decompose_exponent(double theta) {
    if (!(theta >= 0.0 && theta <= 2.0)) {
        throw FracError("order must lie in [0, 2]");
    }
    const double whole = std::floor(theta);
    return {static_cast<int>(whole), theta - whole};
}

std::string_view to_string(FopidClass c) {
    switch (c) {
    case FopidClass::pid:
        return "PID";
    case FopidClass::fopid1:
        return "FOPID1";
    case FopidClass::fopid2:
        return "FOPID2";
    case FopidClass::fopid3:
        return "FOPID3";
    case FopidClass::fopid4:
        return "FOPID4";
    }
    return "?";
}

FopidClass parse_class(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    for (FopidClass c : kAllClasses) {
        if (upper == to_string(c)) {
            return c;
        }
    }
    throw FracError("unknown controller class '" + std::string(name) + "'");
}

namespace {

TransferFunction filtered_derivative(double nf) {
    return {Polynomial{nf, 0.0}, Polynomial{1.0, nf}};
}

TransferFunction integral_branch(double lambda, const OraConfig& cfg) {
    const ExponentSplit split = decompose_exponent(lambda);
    const int integrators = split.integer_part + (split.fractional_part > 0.0 ? 1 : 0);
    const double remainder = static_cast<double>(integrators) - lambda;
    const TransferFunction pure{Polynomial::constant(1.0),
                                Polynomial::monomial(static_cast<std::size_t>(integrators))};
    return lti::tf_series(ora_approximate(remainder, cfg), pure);
}

TransferFunction derivative_branch(double mu, const OraConfig& cfg, double nf) {
    const ExponentSplit split = decompose_exponent(mu);
    TransferFunction d = ora_approximate(split.fractional_part, cfg);
    for (int i = 0; i < split.integer_part; ++i) {
        d = lti::tf_series(d, filtered_derivative(nf));
    }
    return d;
}

TransferFunction scaled(const TransferFunction& tf, double k) {
    return {tf.num().scaled(k), tf.den()};
}

} // namespace

TransferFunction build_fopid(const FopidParams& p, const OraConfig& cfg, double nf) {
    cfg.validate();
    if (!(nf > 0.0)) {
        throw FracError("derivative filter corner must be positive");
    }
    if (!(p.lambda >= 0.0 && p.lambda <= 2.0) || !(p.mu >= 0.0 && p.mu <= 2.0)) {
        throw FracError("controller orders must lie in [0, 2]");
    }
    TransferFunction c = TransferFunction::gain(p.kp);
    if (p.ki != 0.0) {
        const TransferFunction i =
            p.lambda > 0.0 ? integral_branch(p.lambda, cfg) : TransferFunction::gain(1.0);
        c = lti::tf_parallel(c, scaled(i, p.ki));
    }
    if (p.kd != 0.0) {
        const TransferFunction d =
            p.mu > 0.0 ? derivative_branch(p.mu, cfg, nf) : TransferFunction::gain(1.0);
        c = lti::tf_parallel(c, scaled(d, p.kd));
    }
    return c;
}

TransferFunction build_pid(double kp, double ki, double kd, double nf) {
    TransferFunction c = TransferFunction::gain(kp);
    if (ki != 0.0) {
        c = lti::tf_parallel(c, {Polynomial::constant(ki), Polynomial{1.0, 0.0}});
    }
    if (kd != 0.0) {
        c = lti::tf_parallel(c, {Polynomial{kd * nf, 0.0}, Polynomial{1.0, nf}});
    }
    return c;
}

bool validate_class(const FopidParams& p, FopidClass c) {
    switch (c) {
    case FopidClass::pid:
        return p.lambda == 1.0 && p.mu == 1.0;
    case FopidClass::fopid1:
        return p.lambda < 1.0 && p.mu < 1.0;
    case FopidClass::fopid2:
        return p.lambda < 1.0 && p.mu > 1.0;
    case FopidClass::fopid3:
        return p.lambda > 1.0 && p.mu < 1.0;
    case FopidClass::fopid4:
        return p.lambda > 1.0 && p.mu > 1.0;
    }
    return false;
}

} // namespace infusion::frac
