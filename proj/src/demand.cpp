#include "invrl/demand.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace invrl {

namespace chr = std::chrono;

Date parse_iso_date(std::string_view text) {
    // Accept "YYYY-MM-DD" optionally followed by a time part.
    auto fail = [&] { return std::invalid_argument("not an ISO-8601 date: '" + std::string(text) + "'"); };
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') throw fail();
    int y = 0;
    unsigned m = 0, d = 0;
    auto parse = [&](std::string_view part, auto& out) {
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        if (ec != std::errc{} || ptr != part.data() + part.size()) throw fail();
    };
    parse(text.substr(0, 4), y);
    parse(text.substr(5, 2), m);
    parse(text.substr(8, 2), d);
    const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
    if (!ymd.ok()) throw fail();
    return Date{ymd};
}

std::string format_iso_date(Date date) {
    const chr::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

DemandDistribution::DemandDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) {
    if (pmf_.empty()) throw std::invalid_argument("demand pmf is empty");
    double sum = 0.0;
    for (double p : pmf_) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("demand pmf has a negative or non-finite entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("demand pmf does not sum to 1");
    cdf_.resize(pmf_.size());
    std::partial_sum(pmf_.begin(), pmf_.end(), cdf_.begin());
    cdf_.back() = 1.0;
}

DemandDistribution DemandDistribution::point_mass(int value, int max_demand) {
    if (value < 0 || value > max_demand) throw std::invalid_argument("point mass outside support");
    std::vector<double> pmf(static_cast<std::size_t>(max_demand) + 1, 0.0);
    pmf[static_cast<std::size_t>(value)] = 1.0;
    return DemandDistribution(std::move(pmf));
}

double DemandDistribution::mean() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) m += static_cast<double>(i) * pmf_[i];
    return m;
}

double DemandDistribution::variance() const noexcept {
    const double m = mean();
    double v = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) v += (static_cast<double>(i) - m) * (static_cast<double>(i) - m) * pmf_[i];
    return v;
}

int DemandDistribution::sample(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1);
    return static_cast<int>(idx);
}

DemandDistribution discretized_gamma(double mean, double variance, int d_max, BinRule rule) {
    if (!(mean > 0.0) || !(variance > 0.0))
        throw std::domain_error("gamma demand needs positive mean and variance");
    if (d_max < 0) throw std::domain_error("negative maximum demand");
    const double shape = mean * mean / variance;
    const double scale = variance / mean;
    const auto cdf = [&](double x) { return x <= 0.0 ? 0.0 : boost::math::gamma_p(shape, x / scale); };
    const double offset = rule == BinRule::center ? 0.5 : 1.0;

    std::vector<double> pmf(static_cast<std::size_t>(d_max) + 1);
    double lower = 0.0;
    for (int i = 0; i <= d_max; ++i) {
        const double upper = i == d_max ? 1.0 : cdf(i + offset);
        pmf[static_cast<std::size_t>(i)] = std::max(upper - lower, 0.0);
        lower = upper;
    }
    const double sum = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    for (double& p : pmf) p /= sum;
    return DemandDistribution(std::move(pmf));
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("total variation: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
    return 0.5 * sum;
}

double DemandSeries::mean() const {
    if (quantities.empty()) return 0.0;
    return std::accumulate(quantities.begin(), quantities.end(), 0.0) / static_cast<double>(quantities.size());
}

int DemandSeries::max() const {
    return quantities.empty() ? 0 : *std::max_element(quantities.begin(), quantities.end());
}

namespace {

std::string lower_trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Splits one record, honouring double-quoted fields ("" escapes a quote).
std::vector<std::string> split_record(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
    const auto want = lower_trim(name);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (lower_trim(header[i]) == want) return i;
    throw std::runtime_error("transaction file has no column named '" + name + "'");
}

}  // namespace

DemandSeries load_transactions(const std::filesystem::path& path, std::string_view product,
                               const DateRange& range, const TransactionFormat& format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open transaction file " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("transaction file " + path.string() + " is empty");
    const auto header = split_record(line, format.delimiter);
    const std::size_t date_col = find_column(header, format.date_column);
    const std::size_t product_col = find_column(header, format.product_column);
    const std::size_t qty_col = find_column(header, format.quantity_column);
    const std::size_t needed = std::max({date_col, product_col, qty_col}) + 1;
    const auto want = lower_trim(product);

    std::map<Date, double> daily;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_record(line, format.delimiter);
        auto bad = [&](const std::string& why) {
            return std::runtime_error(path.string() + ": row " + std::to_string(row) + ": " + why);
        };
        if (fields.size() < needed) throw bad("expected at least " + std::to_string(needed) + " fields");
        if (lower_trim(fields[product_col]) != want) continue;

        Date date;
        try {
            date = parse_iso_date(lower_trim(fields[date_col]));
        } catch (const std::invalid_argument& e) {
            throw bad(e.what());
        }
        if (range.first && date < *range.first) continue;
        if (range.last && date > *range.last) continue;

        const std::string qty_text = lower_trim(fields[qty_col]);
        double qty = 0.0;
        auto [ptr, ec] = std::from_chars(qty_text.data(), qty_text.data() + qty_text.size(), qty);
        if (ec != std::errc{} || ptr != qty_text.data() + qty_text.size() || !std::isfinite(qty))
            throw bad("unparseable quantity '" + fields[qty_col] + "'");
        daily[date] += qty;
    }
    if (daily.empty())
        throw std::runtime_error("no transactions for product '" + std::string(product) + "' in " + path.string());

    DemandSeries series;
    series.start = daily.begin()->first;
    const auto span_days = (daily.rbegin()->first - series.start).count() + 1;
    series.quantities.assign(static_cast<std::size_t>(span_days), 0);
    for (const auto& [date, qty] : daily)
        series.quantities[static_cast<std::size_t>((date - series.start).count())] =
            std::max(0, static_cast<int>(std::lround(qty)));
    return series;
}

void write_transactions(const std::filesystem::path& path, const DemandSeries& series,
                        std::string_view product, const TransactionFormat& format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const char d = format.delimiter;
    out << format.date_column << d << format.product_column << d << format.quantity_column << '\n';
    for (std::size_t i = 0; i < series.size(); ++i)
        out << format_iso_date(series.date_at(i)) << d << product << d << series.quantities[i] << '\n';
}

std::vector<double> FeatureVector::concat() const {
    std::vector<double> out(numeric);
    out.insert(out.end(), calendar.begin(), calendar.end());
    return out;
}

int iso_week(Date day) {
    const unsigned iso_wd = chr::weekday{day}.iso_encoding();  // Mon=1..Sun=7
    const Date thursday = day + chr::days{4 - static_cast<int>(iso_wd)};
    const chr::year y = chr::year_month_day{thursday}.year();
    const Date jan1{y / chr::January / 1};
    return static_cast<int>((thursday - jan1).count() / 7) + 1;
}

std::vector<double> calendar_features(Date day) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> v(kCalendarFeatures, 0.0);
    const unsigned iso_wd = chr::weekday{day}.iso_encoding();
    v[iso_wd - 1] = 1.0;
    v[7] = iso_wd >= 6 ? 1.0 : 0.0;
    v[8] = iso_week(day) / 53.0;

    const chr::year_month_day ymd{day};
    const double dom = static_cast<unsigned>(ymd.day());
    const double month_len = static_cast<unsigned>(chr::year_month_day_last{ymd.year() / ymd.month() / chr::last}.day());
    v[9] = std::sin(two_pi * dom / month_len);
    v[10] = std::cos(two_pi * dom / month_len);

    const Date jan1{ymd.year() / chr::January / 1};
    const double doy = static_cast<double>((day - jan1).count() + 1);
    const double year_len = ymd.year().is_leap() ? 366.0 : 365.0;
    v[11] = std::sin(two_pi * doy / year_len);
    v[12] = std::cos(two_pi * doy / year_len);
    return v;
}

FeatureVector make_features(std::span<const int> recent, Date previous_day) {
    if (recent.empty()) throw std::domain_error("feature window must be positive");
    FeatureVector f;
    f.numeric.reserve(recent.size() + 1);
    double sum = 0.0;
    for (auto it = recent.rbegin(); it != recent.rend(); ++it) {
        f.numeric.push_back(static_cast<double>(*it));
        sum += *it;
    }
    f.numeric.push_back(sum / static_cast<double>(recent.size()));
    f.calendar = calendar_features(previous_day);
    return f;
}

FeatureVector extract_features(const DemandSeries& series, std::size_t day_index, int window) {
    if (window <= 0) throw std::domain_error("feature window must be positive");
    const auto w = static_cast<std::size_t>(window);
    if (day_index < w || day_index > series.size())
        throw std::domain_error("not enough history for day " + std::to_string(day_index) + " with window " +
                                std::to_string(window));
    const std::span<const int> recent(series.quantities.data() + (day_index - w), w);
    return make_features(recent, series.date_at(day_index - 1));
}

DemandSeries synthesize_history(const DemandDistribution& dist, std::size_t days, Date start, Rng& rng) {
    DemandSeries s;
    s.start = start;
    s.quantities.reserve(days);
    for (std::size_t i = 0; i < days; ++i) s.quantities.push_back(dist.sample(rng));
    return s;
}

}  // namespace invrl
