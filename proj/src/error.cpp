#include "vf/error.hpp"

namespace vf {

const char* errc_name(Errc c) {
    switch (c) {
    case Errc::malformed_header: return "MalformedHeader";
    case Errc::sample_count_mismatch: return "SampleCountMismatch";
    case Errc::bad_timestamp: return "BadTimestamp";
    case Errc::root_not_found: return "RootNotFound";
    case Errc::duplicate_stem: return "DuplicateStem";
    case Errc::all_invalid: return "AllInvalid";
    case Errc::bad_window: return "BadWindow";
    case Errc::bad_cutoff: return "BadCutoff";
    case Errc::bad_tap_count: return "BadTapCount";
    case Errc::bad_sample_rate: return "BadSampleRate";
    case Errc::too_short: return "TooShort";
    case Errc::degenerate_signal: return "DegenerateSignal";
    case Errc::bad_range: return "BadRange";
    case Errc::too_few_minority: return "TooFewMinority";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::no_minority_in_training: return "NoMinorityInTraining";
    case Errc::one_class_only: return "OneClassOnly";
    case Errc::no_positives: return "NoPositives";
    case Errc::key_mismatch: return "KeyMismatch";
    case Errc::missing_labels: return "MissingLabels";
    case Errc::degenerate_split: return "DegenerateSplit";
    case Errc::io_failure: return "IoFailure";
    case Errc::verification_failure: return "VerificationFailure";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::internal: return "Internal";
    }
    return "Unknown";
}

} // namespace vf
