#include "invrl/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace invrl {

void StcSchedule::validate() const {
    if (!(initial > 0.0)) throw std::invalid_argument("STC schedule: initial value must be > 0");
    if (!(floor >= 0.0)) throw std::invalid_argument("STC schedule: floor must be >= 0");
    if (!(smoothing > 0.0)) throw std::invalid_argument("STC schedule: smoothing must be > 0");
    if (initial < floor) throw std::invalid_argument("STC schedule: initial value below floor");
}

double stc_value(const StcSchedule& sched, std::int64_t t) {
    if (t < 0) throw std::domain_error("STC schedule evaluated at negative t");
    const double td = static_cast<double>(t);
    const double y = td * td / (sched.smoothing + td);
    return std::max(sched.initial / (1.0 + y), sched.floor);
}

std::int64_t stc_steps(const StcSchedule& sched, std::int64_t t) {
    const auto rounded = static_cast<std::int64_t>(std::nearbyint(stc_value(sched, t)));
    return std::max(rounded, static_cast<std::int64_t>(std::nearbyint(sched.floor)));
}

Schedule Schedule::constant(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("constant schedule value must be finite and >= 0");
    return Schedule(true, StcSchedule{value, value, 1.0});
}

Schedule Schedule::stc(StcSchedule sched) {
    sched.validate();
    return Schedule(false, sched);
}

double Schedule::value(std::int64_t t) const {
    return constant_ ? sched_.initial : stc_value(sched_, t);
}

std::int64_t Schedule::steps(std::int64_t t) const {
    return constant_ ? static_cast<std::int64_t>(std::nearbyint(sched_.initial)) : stc_steps(sched_, t);
}

std::int64_t Schedule::cumulative_steps(std::int64_t horizon) const {
    std::int64_t total = 0;
    for (std::int64_t t = 0; t < horizon; ++t) total += steps(t);
    return total;
}

}  // namespace invrl
