#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "invrl/random.hpp"

namespace invrl {

using Date = std::chrono::sys_days;

Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date date);

/// Probability mass over integer daily demand 0..max_demand().
class DemandDistribution {
public:
    /// Throws std::invalid_argument unless entries are >= 0 and sum to 1 within 1e-9.
    explicit DemandDistribution(std::vector<double> pmf);

    static DemandDistribution point_mass(int value, int max_demand);

    std::span<const double> pmf() const noexcept { return pmf_; }
    double operator[](int demand) const { return pmf_.at(static_cast<std::size_t>(demand)); }
    int max_demand() const noexcept { return static_cast<int>(pmf_.size()) - 1; }
    double mean() const noexcept;
    double variance() const noexcept;

    /// Inverse-CDF draw; consumes exactly one engine output.
    int sample(Rng& rng) const;

private:
    std::vector<double> pmf_;
    std::vector<double> cdf_;
};

/// How the continuous Gamma density is cut into integer classes.
enum class BinRule {
    center,  ///< class i collects [i - 0.5, i + 0.5)
    floor,   ///< class i collects [i, i + 1)
};

/// Moment-matched Gamma (shape mean^2/variance, scale variance/mean) binned
/// onto 0..d_max. Mass below the first bin goes to class 0 and the upper
/// tail folds into class d_max.
DemandDistribution discretized_gamma(double mean, double variance, int d_max,
                                     BinRule rule = BinRule::center);

double total_variation(std::span<const double> p, std::span<const double> q);

/// Daily demand on consecutive calendar days starting at `start`.
struct DemandSeries {
    Date start{};
    std::vector<int> quantities;

    std::size_t size() const noexcept { return quantities.size(); }
    bool empty() const noexcept { return quantities.empty(); }
    Date date_at(std::size_t day) const { return start + std::chrono::days{static_cast<int>(day)}; }
    double mean() const;
    int max() const;
};

/// Column layout of a transaction file. Columns are located by header name
/// (case-insensitive); other columns are ignored.
struct TransactionFormat {
    char delimiter = ',';
    std::string date_column = "date";
    std::string product_column = "article";
    std::string quantity_column = "Quantity";
};

struct DateRange {
    std::optional<Date> first;
    std::optional<Date> last;
};

/// Reads per-transaction rows, keeps `product` (case-insensitive match),
/// sums quantities per day and zero-fills days without sales. Negative daily
/// totals (net returns) are clamped to zero.
DemandSeries load_transactions(const std::filesystem::path& path, std::string_view product,
                               const DateRange& range = {}, const TransactionFormat& format = {});

/// Writes one row per day in the layout load_transactions reads.
void write_transactions(const std::filesystem::path& path, const DemandSeries& series,
                        std::string_view product, const TransactionFormat& format = {});

/// Forecaster input for one target day.
struct FeatureVector {
    /// Lagged demands d[t-1] .. d[t-window] followed by their mean.
    std::vector<double> numeric;
    /// Weekday one-hot (Mon..Sun), weekend flag, ISO week / 53,
    /// sin/cos of day-in-month, sin/cos of day-in-year; all for day t-1.
    std::vector<double> calendar;

    std::vector<double> concat() const;
};

inline constexpr std::size_t kCalendarFeatures = 13;
inline constexpr int kDefaultWindow = 7;

inline std::size_t feature_size(int window) {
    return static_cast<std::size_t>(window) + 1 + kCalendarFeatures;
}

std::vector<double> calendar_features(Date day);
int iso_week(Date day);

/// Features from an explicit history. `recent` holds the last `recent.size()`
/// demands, oldest first; `previous_day` is the date of the newest entry.
FeatureVector make_features(std::span<const int> recent, Date previous_day);

/// Features for predicting `series.quantities[day_index]`.
FeatureVector extract_features(const DemandSeries& series, std::size_t day_index, int window);

DemandSeries synthesize_history(const DemandDistribution& dist, std::size_t days, Date start, Rng& rng);

}  // namespace invrl
