#pragma once

#include <stdexcept>
#include <string>

namespace spadsim {

// Base for all domain errors. The CLI maps these to exit code 2;
// anything else (usage problems) exits 1.
struct SpadError : std::runtime_error {
    explicit SpadError(const std::string& msg) : std::runtime_error(msg) {}
};

// A spec/config violates one of its invariants.
struct InvalidSpec : SpadError {
    using SpadError::SpadError;
};

// Malformed trace or config file. Carries the 1-based line number when known.
struct ParseError : SpadError {
    long line = 0;
    ParseError(const std::string& msg, long line_no = 0)
        : SpadError(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
};

// A trace row with non-positive token counts or similar bad values.
struct InvalidRow : ParseError {
    using ParseError::ParseError;
};

// Model weights do not fit the deployment's reserved memory.
struct InfeasibleDeployment : SpadError {
    using SpadError::SpadError;
};

// A request can never fit an empty decode machine.
struct CapacityDeadlock : SpadError {
    using SpadError::SpadError;
};

// Provisioning grid exhausted without a feasible cell.
struct NoFeasiblePoint : SpadError {
    using SpadError::SpadError;
};

// SLO evaluation over an empty metrics set.
struct EmptyMetrics : SpadError {
    using SpadError::SpadError;
};

// Argument outside a formula's domain (e.g. die area >= wafer area).
struct DomainError : SpadError {
    using SpadError::SpadError;
};

} // namespace spadsim
