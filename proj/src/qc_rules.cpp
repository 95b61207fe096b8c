#include "pcflow/qc_rules.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pcflow/error.hpp"

namespace pcflow {

AliasingResult detect_aliasing(const VelocityMap& velocity, const SegmentationMask& mask,
                               const AliasingOptions& options) {
  if (velocity.values.dims() != mask.mask.dims()) throw GeometryError("velocity and mask dimensions differ");
  const double limit = options.saturation_fraction * velocity.meta.venc_cm_s;
  const auto v = velocity.values.data();
  const auto s = mask.mask.data();
  std::size_t inside = 0;
  std::size_t saturated = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!s[i]) continue;
    ++inside;
    if (std::abs(v[i]) >= limit) ++saturated;
  }
  AliasingResult out;
  if (inside == 0) return out;
  out.fraction = static_cast<double>(saturated) / static_cast<double>(inside);
  out.flagged = out.fraction >= options.flag_threshold;
  return out;
}

PlausibilityResult check_curve_plausibility(const FlowCurve& curve, const PlausibilityOptions& options) {
  const auto& q = curve.rates_ml_s;
  if (q.empty()) throw EmptyInputError("flow curve has no frames");
  PlausibilityResult out;
  auto fail = [&out](std::string note) {
    out.plausible = false;
    out.notes.push_back(std::move(note));
  };

  for (std::size_t n = 0; n < q.size(); ++n) {
    if (!std::isfinite(q[n])) {
      fail(fmt::format("non-finite flow rate at frame {}", n));
      return out;
    }
  }

  const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
  const double range = *hi - *lo;
  const double gap = std::abs(q.back() - q.front());
  if (range > 0.0 && gap > options.closing_fraction * range) {
    fail(fmt::format("cycle does not close: |end - start| = {:.4g} ml/s exceeds {:.0f}% of the {:.4g} ml/s range", gap,
                     100.0 * options.closing_fraction, range));
  }

  for (std::size_t n = 1; n + 1 < q.size(); ++n) {
    const double neighbours = std::max(std::abs(q[n - 1]), std::abs(q[n + 1]));
    if (std::abs(q[n]) > options.spike_factor * neighbours) {
      fail(fmt::format("spike at frame {}: {:.4g} ml/s vs neighbours {:.4g} / {:.4g}", n, q[n], q[n - 1], q[n + 1]));
    }
  }
  return out;
}

QCReport run_qc_rules(const VelocityMap& velocity, const SegmentationMask& mask, const FlowCurve& curve,
                      const AliasingOptions& aliasing, const PlausibilityOptions& plausibility) {
  QCReport report;
  const auto alias = detect_aliasing(velocity, mask, aliasing);
  report.aliasing_flag = alias.flagged;
  report.aliasing_fraction = alias.fraction;
  if (alias.flagged) {
    report.notes.push_back(fmt::format("aliasing: {:.2f}% of lumen pixels at or above {:.0f}% of VENC",
                                       100.0 * alias.fraction, 100.0 * aliasing.saturation_fraction));
  }
  auto curve_check = check_curve_plausibility(curve, plausibility);
  report.curve_plausible = curve_check.plausible;
  for (auto& note : curve_check.notes) report.notes.push_back(std::move(note));
  return report;
}

}  // namespace pcflow
