// Copyright 2026 The lattice_rl Authors
// SPDX-License-Identifier: Apache-2.0

#include "lattice_rl/error.hpp"

namespace lrl {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidLattice: return "InvalidLattice";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::SymmetryUnavailable: return "SymmetryUnavailable";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::DegenerateGroundState: return "DegenerateGroundState";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::InvalidShift: return "InvalidShift";
    case ErrorCode::NonErgodic: return "NonErgodic";
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::DivisionByZeroAmplitude: return "DivisionByZeroAmplitude";
    case ErrorCode::InvalidWavefunction: return "InvalidWavefunction";
    case ErrorCode::TimestepTooLarge: return "TimestepTooLarge";
    case ErrorCode::TerminalUnreachable: return "TerminalUnreachable";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::TrainingDiverged: return "TrainingDiverged";
    case ErrorCode::SamplerStuck: return "SamplerStuck";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    }
    return "Unknown";
}

} // namespace lrl
