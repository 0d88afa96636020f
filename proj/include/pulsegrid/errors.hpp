#pragma once

#include <stdexcept>
#include <string>

namespace pulsegrid {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define PULSEGRID_ERROR(NAME)                                        \
    struct NAME : Error {                                            \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

// signalio
PULSEGRID_ERROR(MalformedRecord);
PULSEGRID_ERROR(UnsupportedRate);
PULSEGRID_ERROR(TooShort);
PULSEGRID_ERROR(ImplausibleLabel);
// dsp
PULSEGRID_ERROR(NyquistViolation);
PULSEGRID_ERROR(EmptySignal);
PULSEGRID_ERROR(DegenerateSignal);
PULSEGRID_ERROR(BadLength);
// ampd
PULSEGRID_ERROR(SignalTooShort);
PULSEGRID_ERROR(TooFewPeaks);
// features
PULSEGRID_ERROR(NoValidBeats);
PULSEGRID_ERROR(EmptyDataset);
// pca
PULSEGRID_ERROR(TooFewRows);
PULSEGRID_ERROR(NumericalFailure);
PULSEGRID_ERROR(DimensionMismatch);
// boosting
PULSEGRID_ERROR(EmptyTrainingSet);
PULSEGRID_ERROR(NoLearnerAccepted);
PULSEGRID_ERROR(EmptyEnsemble);
// eval
PULSEGRID_ERROR(TooFewSubjects);
PULSEGRID_ERROR(DegenerateFold);
PULSEGRID_ERROR(EmptyPairs);
PULSEGRID_ERROR(TooFewPairs);
// synth / cli
PULSEGRID_ERROR(InvalidConfig);
PULSEGRID_ERROR(IoFailure);
PULSEGRID_ERROR(ConfigError);

#undef PULSEGRID_ERROR

}  // namespace pulsegrid
