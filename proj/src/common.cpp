#include "selectrade/common.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <mutex>

namespace selectrade {

namespace {

int parse_digits(std::string_view text, std::size_t pos, std::size_t count) {
    if (pos + count > text.size()) {
        throw Error("parse", "truncated timestamp '" + std::string(text) + "'");
    }
    int value = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') {
            throw Error("parse", "bad digit in timestamp '" + std::string(text) + "'");
        }
        value = value * 10 + (c - '0');
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) {
        throw Error("parse", "malformed timestamp '" + std::string(text) + "'");
    }
}

}  // namespace

TimeMs parse_iso8601(std::string_view text) {
    using namespace std::chrono;
    const int y = parse_digits(text, 0, 4);
    expect_char(text, 4, '-');
    const int mo = parse_digits(text, 5, 2);
    expect_char(text, 7, '-');
    const int d = parse_digits(text, 8, 2);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw Error("parse", "invalid calendar date '" + std::string(text) + "'");
    }
    TimeMs ms = sys_days{ymd}.time_since_epoch().count() * kDayMs;
    if (text.size() == 10) {
        return ms;
    }
    if (text[10] != 'T' && text[10] != ' ') {
        throw Error("parse", "malformed timestamp '" + std::string(text) + "'");
    }
    const int hh = parse_digits(text, 11, 2);
    expect_char(text, 13, ':');
    const int mm = parse_digits(text, 14, 2);
    expect_char(text, 16, ':');
    const int ss = parse_digits(text, 17, 2);
    if (hh > 23 || mm > 59 || ss > 60) {
        throw Error("parse", "time of day out of range in '" + std::string(text) + "'");
    }
    ms += (hh * 3600LL + mm * 60LL + ss) * 1000LL;
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        int frac = 0;
        int digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            if (digits < 3) {
                frac = frac * 10 + (text[pos] - '0');
            }
            ++digits;
            ++pos;
        }
        if (digits == 0) {
            throw Error("parse", "empty fractional seconds in '" + std::string(text) + "'");
        }
        for (int i = digits; i < 3; ++i) {
            frac *= 10;
        }
        ms += frac;
    }
    if (pos < text.size() && text[pos] == 'Z') {
        ++pos;
    }
    if (pos != text.size()) {
        throw Error("parse", "trailing characters in timestamp '" + std::string(text) + "'");
    }
    return ms;
}

std::string format_iso8601(TimeMs t) {
    using namespace std::chrono;
    TimeMs day_index = t / kDayMs;
    TimeMs rem = t % kDayMs;
    if (rem < 0) {
        rem += kDayMs;
        --day_index;
    }
    const year_month_day ymd{sys_days{days{day_index}}};
    const auto secs = rem / 1000;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(secs / 3600), static_cast<long long>((secs / 60) % 60),
                  static_cast<long long>(secs % 60), static_cast<long long>(rem % 1000));
    return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
    // FNV-1a over the salt, then the splitmix finaliser.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : salt) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix_seed(seed, h);
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void info(const std::string& message) {
    if (g_level.load() <= Level::info) {
        std::lock_guard lock(g_mutex);
        std::cerr << "[info] " << message << '\n';
    }
}

void warn(const std::string& message) {
    if (g_level.load() <= Level::warn) {
        std::lock_guard lock(g_mutex);
        std::cerr << "[warn] " << message << '\n';
    }
}

}  // namespace log

}  // namespace selectrade
