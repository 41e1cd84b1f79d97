#ifndef VECFL_CORE_VALIDATE_HPP_
#define VECFL_CORE_VALIDATE_HPP_

#include <string>
#include <vector>

#include "vecfl/core/types.hpp"

namespace vecfl {

struct Violation {
    std::string code;     // machine-readable, e.g. QUORUM_EXCEEDS_M
    std::string message;  // human-readable context
};

struct ValidationResult {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    bool has(const std::string& code) const {
        for (const auto& v : violations)
            if (v.code == code) return true;
        return false;
    }
};

// Checks every structural invariant and returns the complete list of
// violations; an invalid config is never partially accepted.
ValidationResult validate_config(const SystemConfig& cfg);

// Fills instance-derived defaults (chi, xi6, per-task weight coefficients).
// Must be called on a validated config before scheduling; idempotent.
void finalize_defaults(SystemConfig& cfg);

}  // namespace vecfl

#endif  // VECFL_CORE_VALIDATE_HPP_
