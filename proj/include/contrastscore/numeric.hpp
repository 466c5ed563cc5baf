#pragma once

#include <cmath>

namespace contrastscore {

/// Left-to-right Neumaier-compensated accumulator. Summation order is fixed by the
/// caller, so results are bit-reproducible.
class CompensatedSum {
  public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            carry_ += (sum_ - t) + x;
        else
            carry_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + carry_; }

  private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

inline constexpr double kLn10 = 2.302585092994045684017991454684364208;

} // namespace contrastscore
