#pragma once

#include <cstdint>

namespace invrl {

/// Search-then-converge decay: initial / (1 + t^2 / (smoothing + t)),
/// never below `floor`.
struct StcSchedule {
    double initial = 1.0;
    double floor = 0.0;
    double smoothing = 1.0;

    void validate() const;
};

double stc_value(const StcSchedule& sched, std::int64_t t);

/// Integer planning depth: stc_value rounded half-to-even, at least round(floor).
std::int64_t stc_steps(const StcSchedule& sched, std::int64_t t);

/// Either a constant or an STC-decaying quantity, evaluated at global step t.
class Schedule {
public:
    static Schedule constant(double value);
    static Schedule stc(StcSchedule sched);

    bool is_constant() const noexcept { return constant_; }
    const StcSchedule& stc_params() const noexcept { return sched_; }

    double value(std::int64_t t) const;
    std::int64_t steps(std::int64_t t) const;

    /// Sum of steps(t) for t in [0, horizon).
    std::int64_t cumulative_steps(std::int64_t horizon) const;

private:
    Schedule(bool constant, StcSchedule s) : constant_(constant), sched_(s) {}

    bool constant_;
    StcSchedule sched_;  // for a constant schedule only `initial` is used
};

}  // namespace invrl
