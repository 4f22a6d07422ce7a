#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "winoforms/error.hpp"

namespace winoforms {

// Linear warmup from 0 to the base rate over the first warmup_fraction of
// total steps, then linear decay back to 0 at total_steps.
class LinearSchedule {
 public:
  LinearSchedule(double base_lr, std::uint64_t total_steps, double warmup_fraction = 0.06)
      : base_(base_lr), total_(total_steps) {
    if (total_steps == 0) throw Error("schedule: total steps must be positive");
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
      throw Error("schedule: warmup fraction must lie in [0, 1]");
    }
    warmup_ = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::llround(warmup_fraction * static_cast<double>(total_))));
    warmup_ = std::min(warmup_, total_);
  }

  std::uint64_t warmup_steps() const noexcept { return warmup_; }
  std::uint64_t total_steps() const noexcept { return total_; }

  double at(double step) const {
    if (step <= 0.0) return 0.0;
    const double w = static_cast<double>(warmup_);
    const double t = static_cast<double>(total_);
    if (step <= w) return base_ * step / w;
    if (step >= t) return 0.0;
    return base_ * (t - step) / (t - w);
  }

  // Rate for the k-th optimizer update (0-based); updates are numbered from 1
  // on the schedule so the first one moves the parameters.
  double for_update(std::uint64_t k) const { return at(static_cast<double>(k + 1)); }

 private:
  double base_;
  std::uint64_t total_;
  std::uint64_t warmup_ = 1;
};

}  // namespace winoforms
