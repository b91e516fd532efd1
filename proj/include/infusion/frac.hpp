#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "infusion/lti.hpp"

// Oustaloup recursive approximation of s^gamma and rational PI^lambda D^mu
// controllers built from it.
namespace infusion::frac {

class FracError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct OraConfig {
    int order_n = 2;       // 2N+1 pole/zero pairs
    double omega_b = 1e-2; // lower band edge, rad/min
    double omega_h = 1e2;  // upper band edge, rad/min

    void validate() const;
};

/// Raw factors of the approximation: s^gamma ~ gain * prod (s + zeros[i]) / (s + poles[i]).
/// Index i corresponds to k = i - N.
struct OraFactors {
    double gain = 1.0;
    std::vector<double> zeros;
    std::vector<double> poles;
};

OraFactors ora_factors(double gamma, const OraConfig& cfg);

/// Rational approximation of s^gamma for -1 < gamma < 1. gamma == 0 yields
/// exactly 1/1.
lti::TransferFunction ora_approximate(double gamma, const OraConfig& cfg);

struct ExponentSplit {
    int integer_part = 0;
    double fractional_part = 0.0;
};

/// Splits an order in [0, 2] into integer and fractional parts.
ExponentSplit decompose_exponent(double theta);

struct FopidParams {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double lambda = 1.0; // integral order
    double mu = 1.0;     // derivative order
};

enum class FopidClass { pid, fopid1, fopid2, fopid3, fopid4 };

inline constexpr FopidClass kAllClasses[] = {FopidClass::pid, FopidClass::fopid1,
                                             FopidClass::fopid2, FopidClass::fopid3,
                                             FopidClass::fopid4};

std::string_view to_string(FopidClass c);
/// Case-insensitive; throws FracError on unknown names.
FopidClass parse_class(std::string_view name);

/// Default derivative filter corner, rad/min.
inline constexpr double kDefaultDerivFilter = 100.0;

/**
 * Rational controller Kp + Ki*I(s) + Kd*D(s).
 *
 * I(s) = ORA(s^(ceil(lambda)-lambda)) / s^ceil(lambda), so integer integrators
 * stay exact; D(s) = ORA(s^frac(mu)) * (s*Nf/(s+Nf))^floor(mu). Branches with a
 * zero gain are dropped.
 */
lti::TransferFunction build_fopid(const FopidParams& params, const OraConfig& cfg,
                                  double deriv_filter_nf = kDefaultDerivFilter);

/// Kp + Ki/s + Kd*s*Nf/(s+Nf), built directly.
lti::TransferFunction build_pid(double kp, double ki, double kd,
                                double deriv_filter_nf = kDefaultDerivFilter);

/// Class membership by order ranges; orders exactly 1 belong to PID only.
bool validate_class(const FopidParams& params, FopidClass c);

} // namespace infusion::frac
