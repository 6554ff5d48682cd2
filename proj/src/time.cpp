#include "svcevo/time.hpp"

#include "svcevo/error.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace svcevo {

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
    int value = 0;
    const char* first = text.data() + pos;
    const char* last = first + len;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) throw Error("malformed timestamp '" + std::string(text) + "'");
    return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
    if (text[pos] != c) throw Error("malformed timestamp '" + std::string(text) + "'");
}

} // namespace

Instant parse_instant(std::string_view text) {
    using namespace std::chrono;
    if (text.size() != 10 && text.size() != 20) throw Error("malformed timestamp '" + std::string(text) + "'");
    expect(text, 4, '-');
    expect(text, 7, '-');
    const year_month_day date{year{parse_field(text, 0, 4)},
                              month{static_cast<unsigned>(parse_field(text, 5, 2))},
                              day{static_cast<unsigned>(parse_field(text, 8, 2))}};
    if (!date.ok()) throw Error("invalid calendar date '" + std::string(text) + "'");
    int hh = 0, mm = 0, ss = 0;
    if (text.size() == 20) {
        expect(text, 10, 'T');
        expect(text, 13, ':');
        expect(text, 16, ':');
        expect(text, 19, 'Z');
        hh = parse_field(text, 11, 2);
        mm = parse_field(text, 14, 2);
        ss = parse_field(text, 17, 2);
        if (hh > 23 || mm > 59 || ss > 59) throw Error("invalid time of day '" + std::string(text) + "'");
    }
    const auto days = sys_days{date}.time_since_epoch().count();
    return Instant{static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss};
}

std::string format_instant(Instant t) {
    using namespace std::chrono;
    std::int64_t days = t.seconds / 86400;
    std::int64_t rem = t.seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    const year_month_day date{sys_days{std::chrono::days{days}}};
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                  static_cast<int>(rem / 3600), static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
    return buffer;
}

} // namespace svcevo
