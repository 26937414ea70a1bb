#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace selectrade {

/// Error raised by every module. `code` is a short machine-readable tag
/// ("parse", "invalid_argument", "insufficient_data", ...) that the CLI
/// forwards in its JSON error payload.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Row-major dense matrix used for feature rows and probability outputs.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Milliseconds since the Unix epoch, UTC.
using TimeMs = std::int64_t;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr TimeMs kMinuteMs = 60'000;
inline constexpr TimeMs kDayMs = 86'400'000;

/// Parses "YYYY-MM-DDTHH:MM:SS[.fff]Z" (the trailing Z and the fractional
/// part are optional) or a bare "YYYY-MM-DD".
TimeMs parse_iso8601(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_iso8601(TimeMs t);

/// splitmix64 finaliser; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt);

/// Splits one CSV line on commas (no quoting; the formats here never quote).
std::vector<std::string_view> split_csv(std::string_view line);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

namespace log {
enum class Level { debug, info, warn, error, off };
void set_level(Level level);
Level level();
void info(const std::string& message);
void warn(const std::string& message);
}  // namespace log

}  // namespace selectrade
