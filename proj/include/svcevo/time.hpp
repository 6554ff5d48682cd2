#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace svcevo {

/// Absolute UTC instant, whole seconds since the Unix epoch.
struct Instant {
    std::int64_t seconds = 0;

    friend auto operator<=>(const Instant&, const Instant&) = default;
};

inline constexpr double kSecondsPerDay = 86400.0;

/// Parses `YYYY-MM-DDTHH:MM:SSZ` (a bare `YYYY-MM-DD` means midnight UTC).
/// Throws svcevo::Error on anything else.
Instant parse_instant(std::string_view text);

/// Inverse of parse_instant; always emits the full `YYYY-MM-DDTHH:MM:SSZ` form.
std::string format_instant(Instant t);

/// Exact real-valued day count `(later - earlier) / 86400`.
inline double days_between(Instant earlier, Instant later) {
    return static_cast<double>(later.seconds - earlier.seconds) / kSecondsPerDay;
}

inline Instant add_days(Instant t, std::int64_t days) {
    return Instant{t.seconds + days * 86400};
}

} // namespace svcevo
