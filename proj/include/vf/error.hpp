#pragma once

#include <stdexcept>
#include <string>

namespace vf {

// Failure conditions surfaced by the library. Everything except `internal`
// is an input/validation problem (CLI exit code 2); `internal` maps to 1.
enum class Errc {
    malformed_header,
    sample_count_mismatch,
    bad_timestamp,
    root_not_found,
    duplicate_stem,
    all_invalid,
    bad_window,
    bad_cutoff,
    bad_tap_count,
    bad_sample_rate,
    too_short,
    degenerate_signal,
    bad_range,
    too_few_minority,
    dimension_mismatch,
    no_minority_in_training,
    one_class_only,
    no_positives,
    key_mismatch,
    missing_labels,
    degenerate_split,
    io_failure,
    verification_failure,
    invalid_config,
    internal,
};

const char* errc_name(Errc c);

class VfError : public std::runtime_error {
public:
    VfError(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const noexcept { return code_; }
    bool is_internal() const noexcept { return code_ == Errc::internal; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw VfError(code, msg); }

} // namespace vf
