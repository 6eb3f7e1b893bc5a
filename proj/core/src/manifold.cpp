#include "phasewalk/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace phasewalk {

double sigma(double x, double xd, const ManifoldParams& p) {
  const double r0 = p.x0 - p.x_foot;
  const double r = x - p.x_foot;
  const double w2 = p.omega * p.omega;
  const double v0sq = p.xd0 * p.xd0;
  return r0 * r0 *
             (2.0 * v0sq - xd * xd + w2 * (x - p.x0) * (x + p.x0 - 2.0 * p.x_foot)) -
         v0sq * r * r + v0sq * (xd * xd - v0sq) / w2;
}

double sigmaApex(double x, double xd, double xd_apex, double x_foot,
                 double omega) {
  const double w2 = omega * omega;
  const double r = x - x_foot;
  return xd_apex * xd_apex / w2 * (xd * xd - xd_apex * xd_apex - w2 * r * r);
}

double zeta(double x, double xd, const ManifoldParams& p, double zeta0) {
  if (xd == 0.0 || p.xd0 == 0.0 || std::signbit(xd) != std::signbit(p.xd0)) {
    throw DomainError("zeta: velocities must be nonzero and share sign");
  }
  if (x == p.x_foot || p.x0 == p.x_foot) {
    throw DomainError("zeta: undefined at the contact position");
  }
  const double w2 = p.omega * p.omega;
  return zeta0 * std::pow(xd / p.xd0, w2) * (x - p.x_foot) / (p.x0 - p.x_foot);
}

StepProgression::StepProgression(const ManifoldParams& p, double x_entry,
                                 double xd_entry, double x_trans,
                                 double xd_trans)
    : omega2_(p.omega * p.omega), x_foot_(p.x_foot) {
  m_entry_ = monomial(x_entry, xd_entry);
  const double m_trans = monomial(x_trans, xd_trans);
  if (m_trans == m_entry_) {
    throw DomainError("StepProgression: entry and transition coincide");
  }
  inv_span_ = 1.0 / (m_trans - m_entry_);
}

double StepProgression::monomial(double x, double xd) const {
  if (!(xd > 0.0)) {
    throw DomainError("StepProgression: requires forward motion (xd > 0)");
  }
  return std::pow(xd, omega2_) * (x - x_foot_);
}

double StepProgression::operator()(double x, double xd) const {
  return (monomial(x, xd) - m_entry_) * inv_span_;
}

double sensitivityNorm(std::span<const ZetaSigmaSample> samples, double zeta_d,
                       double zeta_trans) {
  if (!(zeta_trans > zeta_d)) {
    throw EmptyInterval("sensitivityNorm: zeta_d must precede zeta_trans");
  }
  if (samples.size() < 2) {
    throw EmptyInterval("sensitivityNorm: need at least two samples");
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].zeta > samples[i - 1].zeta)) {
      throw DomainError("sensitivityNorm: zeta samples must be increasing");
    }
  }
  if (samples.front().zeta > zeta_d + 1e-12 ||
      samples.back().zeta < zeta_trans - 1e-12) {
    throw EmptyInterval("sensitivityNorm: samples do not cover the interval");
  }

  // sigma^2 at a clipped boundary, linearly interpolated in zeta.
  auto sigmaAt = [&](double z) {
    auto it = std::lower_bound(
        samples.begin(), samples.end(), z,
        [](const ZetaSigmaSample& s, double v) { return s.zeta < v; });
    if (it == samples.begin()) return it->sigma;
    if (it == samples.end()) return samples.back().sigma;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double f = (z - lo.zeta) / (hi.zeta - lo.zeta);
    return lo.sigma + f * (hi.sigma - lo.sigma);
  };

  double integral = 0.0;
  double prev_z = zeta_d;
  double prev_s2 = sigmaAt(zeta_d) * sigmaAt(zeta_d);
  for (const auto& s : samples) {
    if (s.zeta <= zeta_d) continue;
    const double z = std::min(s.zeta, zeta_trans);
    const double sig = (s.zeta <= zeta_trans) ? s.sigma : sigmaAt(zeta_trans);
    const double s2 = sig * sig;
    integral += 0.5 * (prev_s2 + s2) * (z - prev_z);
    prev_z = z;
    prev_s2 = s2;
    if (s.zeta >= zeta_trans) break;
  }
  if (prev_z < zeta_trans) {
    const double s2 = sigmaAt(zeta_trans) * sigmaAt(zeta_trans);
    integral += 0.5 * (prev_s2 + s2) * (zeta_trans - prev_z);
  }
  return std::sqrt(integral / (zeta_trans - zeta_d));
}

const char* to_string(DisturbanceCategory c) {
  switch (c) {
    case DisturbanceCategory::kSameSideSmall: return "same-side-small";
    case DisturbanceCategory::kAsymptoteCrossing: return "asymptote-crossing";
    case DisturbanceCategory::kSameDirectionSmall: return "same-direction-small";
    case DisturbanceCategory::kDirectionReversal: return "direction-reversal";
  }
  return "unknown";
}

DisturbanceReport classifyDisturbance(const PhaseState& pre,
                                      const PhaseState& post,
                                      const ManifoldParams& p) {
  DisturbanceReport rep;
  rep.pre = pre;
  rep.post = post;
  rep.sigma_jump = sigma(post.x, post.xd, p) - sigma(pre.x, pre.xd, p);

  const double asym = p.omega * (pre.x - p.x_foot);
  const double side_pre = pre.xd - asym;
  const double side_post = post.xd - asym;

  const bool reversed =
      (post.xd == 0.0) || (std::signbit(post.xd) != std::signbit(pre.xd));
  // A post state exactly on the asymptote counts as a crossing.
  const bool crossed =
      (side_post == 0.0) || (std::signbit(side_post) != std::signbit(side_pre));

  if (reversed) {
    rep.category = DisturbanceCategory::kDirectionReversal;
  } else if (crossed) {
    rep.category = DisturbanceCategory::kAsymptoteCrossing;
  } else if (post.xd - pre.xd >= 0.0) {
    rep.category = DisturbanceCategory::kSameSideSmall;
  } else {
    rep.category = DisturbanceCategory::kSameDirectionSmall;
  }
  return rep;
}

double recoverabilityRadius(double eps, double x_trans, double x0,
                            double xd_apex, double tau_y,
                            const RobotParams& params) {
  const double mu =
      2.0 * std::sqrt(2.0) * xd_apex * xd_apex / (params.mass * params.gravity);
  return eps + std::sqrt(2.0) / 2.0 * mu * (x_trans - x0) * tau_y;
}

}  // namespace phasewalk
