#pragma once

#include <cstdint>
#include <string>

namespace vf {

// De-identified surrogate timestamp with minute resolution. Only ordering and
// differences matter; arithmetic is plain proleptic-Gregorian calendar math
// with no leap seconds or time zones.
struct SurrogateTime {
    int year = 2100;
    int month = 1;  // 01-12
    int day = 1;    // 01-31 (not checked against month length)
    int hour = 0;   // 00-23
    int minute = 0; // 00-59

    bool operator==(const SurrogateTime&) const = default;
};

// Throws BadTimestamp if a field is outside the ranges above.
void validate(const SurrogateTime& t);

// Linear minute count (epoch 1970-01-01T00:00). Day overflow such as Feb 31
// extends linearly past the month end, which preserves ordering.
int64_t to_minutes(const SurrogateTime& t);
SurrogateTime from_minutes(int64_t minutes);

inline double to_seconds(const SurrogateTime& t) { return static_cast<double>(to_minutes(t)) * 60.0; }

// "YYYY-MM-DDThh:mm"
std::string format_iso(const SurrogateTime& t);
SurrogateTime parse_iso(const std::string& s);

// "YYYY-MM-DD-hh-mm" (record file stems)
std::string format_stem_time(const SurrogateTime& t);
SurrogateTime parse_stem_time(const std::string& s);

} // namespace vf
