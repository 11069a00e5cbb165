// Copyright (c) the cortexkit contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cortexkit {

/// Coarse failure category, used by the CLI to choose its exit code
/// (1 = bad/missing input, 2 = numerical failure).
enum class ErrorKind { Input, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define CORTEXKIT_DEFINE_ERROR(Name, Kind)                                       \
    class Name final : public Error {                                            \
    public:                                                                      \
        explicit Name(const std::string& msg) : Error(ErrorKind::Kind, msg) {}   \
    }

// io
CORTEXKIT_DEFINE_ERROR(BadMagic, Input);
CORTEXKIT_DEFINE_ERROR(UnsupportedDtype, Input);
CORTEXKIT_DEFINE_ERROR(TruncatedFile, Input);
CORTEXKIT_DEFINE_ERROR(IoFailure, Input);
CORTEXKIT_DEFINE_ERROR(MalformedOff, Input);
CORTEXKIT_DEFINE_ERROR(DuplicateId, Input);
CORTEXKIT_DEFINE_ERROR(BadLaterality, Input);

// voxelgrid
CORTEXKIT_DEFINE_ERROR(EmptyVolume, Input);
CORTEXKIT_DEFINE_ERROR(MissingWhiteMatter, Input);

// netref
CORTEXKIT_DEFINE_ERROR(ShapeMismatch, Input);
CORTEXKIT_DEFINE_ERROR(ProbNotNormalized, Input);

// surfgen
CORTEXKIT_DEFINE_ERROR(EmptyMask, Input);
CORTEXKIT_DEFINE_ERROR(NonManifold, Numeric);
CORTEXKIT_DEFINE_ERROR(SolverNoConvergence, Numeric);
CORTEXKIT_DEFINE_ERROR(MultiComponent, Numeric);
CORTEXKIT_DEFINE_ERROR(DegenerateOrientation, Numeric);
CORTEXKIT_DEFINE_ERROR(ZeroEmbeddingVector, Numeric);

// surfmeasure
CORTEXKIT_DEFINE_ERROR(OutOfBounds, Input);
CORTEXKIT_DEFINE_ERROR(EmptyMesh, Input);

// evalstats
CORTEXKIT_DEFINE_ERROR(GridMismatch, Input);
CORTEXKIT_DEFINE_ERROR(EmptySet, Input);
CORTEXKIT_DEFINE_ERROR(DegenerateVariance, Numeric);
CORTEXKIT_DEFINE_ERROR(RankDeficient, Numeric);
CORTEXKIT_DEFINE_ERROR(TooFewPairs, Input);

#undef CORTEXKIT_DEFINE_ERROR

} // namespace cortexkit
