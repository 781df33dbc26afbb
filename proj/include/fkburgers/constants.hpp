#pragma once

#include <string>

#include "errors.hpp"

namespace fkb {

/// Constants of the verification bounds. None of them has a canonical value;
/// all are configuration.
struct BoundConstants {
    /// Induction constant.
    double C = 2.0;
    /// Normal-regime displacement constant.
    double C_kappa = 4.0;
    /// Abnormal-regime exponent.
    double kappa_prime = 2.0;
    /// Abnormal-regime prefactor.
    double C_abn = 4.0;
    /// Gaussian tail rate.
    double c_tail = 0.25;
    /// Core radius factor in front of (16 C <Ut>)^{kappa/(kappa-1)}.
    double core_threshold_factor = 32.0;

    void validate() const {
        if (!(C > 1.0)) throw ConfigError("constants.C must be > 1");
        if (!(C_kappa > 1.0)) throw ConfigError("constants.C_kappa must be > 1");
        if (!(kappa_prime >= 1.0)) throw ConfigError("constants.kappa_prime must be >= 1");
        if (!(C_abn > 0.0)) throw ConfigError("constants.C_abn must be > 0");
        if (!(c_tail > 0.0)) throw ConfigError("constants.c_tail must be > 0");
        if (!(core_threshold_factor > 0.0)) throw ConfigError("constants.core_threshold_factor must be > 0");
    }
};

}  // namespace fkb
