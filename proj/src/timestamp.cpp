#include "vf/timestamp.hpp"

#include <cstdio>

#include "vf/error.hpp"

namespace vf {

namespace {

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void civil_from_days(int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const int64_t doe = z - era * 146097;
    const int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = yoe + era * 400;
    const int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const int64_t mp = (5 * doy + 2) / 153;
    const int64_t d = doy - (153 * mp + 2) / 5 + 1;
    const int64_t m = mp + (mp < 10 ? 3 : -9);
    year = static_cast<int>(y + (m <= 2));
    month = static_cast<int>(m);
    day = static_cast<int>(d);
}

int parse_digits(const std::string& s, size_t pos, size_t n) {
    int v = 0;
    for (size_t i = 0; i < n; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') fail(Errc::bad_timestamp, "non-digit in timestamp '" + s + "'");
        v = v * 10 + (c - '0');
    }
    return v;
}

SurrogateTime parse_with_seps(const std::string& s, char sep_date_time) {
    if (s.size() != 16 || s[4] != '-' || s[7] != '-' || s[10] != sep_date_time || s[13] != (sep_date_time == 'T' ? ':' : '-'))
        fail(Errc::bad_timestamp, "expected YYYY-MM-DD" + std::string(1, sep_date_time) + "hh?mm, got '" + s + "'");
    SurrogateTime t;
    t.year = parse_digits(s, 0, 4);
    t.month = parse_digits(s, 5, 2);
    t.day = parse_digits(s, 8, 2);
    t.hour = parse_digits(s, 11, 2);
    t.minute = parse_digits(s, 14, 2);
    validate(t);
    return t;
}

} // namespace

void validate(const SurrogateTime& t) {
    if (t.year < 1 || t.year > 9999) fail(Errc::bad_timestamp, "year out of range");
    if (t.month < 1 || t.month > 12) fail(Errc::bad_timestamp, "month out of range");
    if (t.day < 1 || t.day > 31) fail(Errc::bad_timestamp, "day out of range");
    if (t.hour < 0 || t.hour > 23) fail(Errc::bad_timestamp, "hour out of range");
    if (t.minute < 0 || t.minute > 59) fail(Errc::bad_timestamp, "minute out of range");
}

int64_t to_minutes(const SurrogateTime& t) {
    return days_from_civil(t.year, t.month, t.day) * 1440 + t.hour * 60 + t.minute;
}

SurrogateTime from_minutes(int64_t minutes) {
    int64_t days = minutes / 1440;
    int64_t rem = minutes % 1440;
    if (rem < 0) {
        rem += 1440;
        days -= 1;
    }
    SurrogateTime t;
    civil_from_days(days, t.year, t.month, t.day);
    t.hour = static_cast<int>(rem / 60);
    t.minute = static_cast<int>(rem % 60);
    return t;
}

std::string format_iso(const SurrogateTime& t) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d", t.year, t.month, t.day, t.hour, t.minute);
    return buf;
}

SurrogateTime parse_iso(const std::string& s) { return parse_with_seps(s, 'T'); }

std::string format_stem_time(const SurrogateTime& t) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d-%02d-%02d", t.year, t.month, t.day, t.hour, t.minute);
    return buf;
}

SurrogateTime parse_stem_time(const std::string& s) { return parse_with_seps(s, '-'); }

} // namespace vf
