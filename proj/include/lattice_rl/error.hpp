// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lrl {

/// Failure categories surfaced by the core library. The numeric values are
/// part of the C ABI (see lattice_rl.h) and must not be reordered.
enum class ErrorCode : int {
    InvalidArgument = 1,
    InvalidLattice = 2,
    InvalidAction = 3,
    StateSpaceTooLarge = 4,
    SymmetryUnavailable = 5,
    InvalidModel = 6,
    DegenerateGroundState = 7,
    ConvergenceFailure = 8,
    InvalidShift = 9,
    NonErgodic = 10,
    InvalidScale = 11,
    DivisionByZeroAmplitude = 12,
    InvalidWavefunction = 13,
    TimestepTooLarge = 14,
    TerminalUnreachable = 15,
    SupportMismatch = 16,
    ShapeError = 17,
    TrainingDiverged = 18,
    SamplerStuck = 19,
    DegenerateSeries = 20,
    IoError = 21,
    FormatError = 22,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace lrl
