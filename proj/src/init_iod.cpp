#include "streakfit/init_iod.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "streakfit/camera.hpp"
#include "streakfit/errors.hpp"

namespace streakfit {

double GaussPolynomial::operator()(double r) const {
  const double r3 = r * r * r;
  const double r6 = r3 * r3;
  return r6 * r * r + a * r6 + b * r3 + c;
}

std::vector<double> polynomial_roots(const GaussPolynomial& poly, double min_radius) {
  // Scan a log-spaced grid for sign changes, then bisect. Descartes' rule
  // allows at most three positive roots.
  constexpr int kSamples = 4000;
  const double lo = std::max(min_radius, 1.0);
  const double hi = 1e3 * kEarthRadius;
  std::vector<double> roots;
  double x_prev = lo;
  double f_prev = poly(lo);
  for (int i = 1; i <= kSamples; ++i) {
    const double x = lo * std::pow(hi / lo, static_cast<double>(i) / kSamples);
    const double fx = poly(x);
    if (f_prev == 0.0) {
      roots.push_back(x_prev);
    } else if ((f_prev < 0.0) != (fx < 0.0) && fx != 0.0) {
      double a = x_prev;
      double b = x;
      double fa = f_prev;
      for (int it = 0; it < 200 && (b - a) > 1e-12 * b; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = poly(m);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    x_prev = x;
    f_prev = fx;
  }
  return roots;
}

namespace {

struct GaussSetup {
  double tau1 = 0.0;
  double tau3 = 0.0;
  double tau = 0.0;
  double d0 = 0.0;
  double d[3][3] = {};  // d[i][j] = R_i . p_j
  double a = 0.0;
  double b = 0.0;
  double e = 0.0;
};

struct Candidate {
  OrbitState state;
  double residual = std::numeric_limits<double>::infinity();
};

double rel_change(double now, double before) {
  return std::abs(now - before) / std::max(std::abs(now), 1.0);
}


// Levenberg-Marquardt on the six tangent-plane LOS residuals, starting from a
// Gauss estimate. The f and g iteration alone is badly conditioned on short
// arcs; a few damped Newton steps on the exact two-body model are not.
using Vec6r = Eigen::Matrix<double, 6, 1>;

std::optional<Vec6r> los_residuals(const std::array<LosObservation, 3>& obs, const OrbitState& s, double mu) {
  Vec6r out;
  for (std::size_t i = 0; i < 3; ++i) {
    Vec3 p;
    try {
      p = propagate_position(s, obs[i].epoch - s.epoch, mu);
    } catch (const Error&) {
      return std::nullopt;
    }
    const Vec3 d = (p - obs[i].site_eci).normalized();
    const Vec3& l = obs[i].los;
    if (!(d.dot(l) > 0.0)) return std::nullopt;
    const Vec3 e1 = l.unitOrthogonal();
    const Vec3 e2 = l.cross(e1);
    out[static_cast<Eigen::Index>(2 * i)] = d.dot(e1);
    out[static_cast<Eigen::Index>(2 * i + 1)] = d.dot(e2);
  }
  return out;
}

std::optional<OrbitState> polish(const std::array<LosObservation, 3>& obs, const OrbitState& start, double mu) {
  if (!(start.energy(mu) < 0.0)) return std::nullopt;
  // Work in km and km/s scaled to order one.
  const double ps = start.position.norm();
  const double vs = start.velocity.norm();
  Vec6r scale;
  scale << ps, ps, ps, vs, vs, vs;
  auto state_of = [&](const Vec6r& x) {
    const Vec6r o = x.cwiseProduct(scale);
    return OrbitState{start.epoch, o.head<3>(), o.tail<3>()};
  };
  Vec6r x = start.as_vector().cwiseQuotient(scale);
  std::optional<Vec6r> res = los_residuals(obs, state_of(x), mu);
  if (!res) return std::nullopt;
  double cost = res->squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < 60 && cost > 1e-26; ++it) {
    Eigen::Matrix<double, 6, 6> jac;
    for (int q = 0; q < 6; ++q) {
      const double h = 1e-7;
      Vec6r xp = x;
      Vec6r xm = x;
      xp[q] += h;
      xm[q] -= h;
      const auto rp = los_residuals(obs, state_of(xp), mu);
      const auto rm = los_residuals(obs, state_of(xm), mu);
      if (!rp || !rm) return std::nullopt;
      jac.col(q) = (*rp - *rm) / (2.0 * h);
    }
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Vec6r jtr = jac.transpose() * *res;
    bool improved = false;
    for (int tries = 0; tries < 12 && !improved; ++tries) {
      Eigen::Matrix<double, 6, 6> a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
      const Vec6r step = a.ldlt().solve(-jtr);
      if (!step.allFinite()) return std::nullopt;
      const Vec6r xn = x + step;
      const OrbitState sn = state_of(xn);
      const auto rn = sn.energy(mu) < 0.0 ? los_residuals(obs, sn, mu) : std::nullopt;
      if (rn && rn->squaredNorm() < cost) {
        x = xn;
        res = rn;
        cost = rn->squaredNorm();
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return state_of(x);
}

std::optional<Candidate> solve_for_root(const std::array<LosObservation, 3>& obs, const GaussSetup& g,
                                        double r2, double mu, const GaussOptions& options) {
  const double r2_3 = r2 * r2 * r2;
  const double t1 = g.tau1;
  const double t3 = g.tau3;
  const double t = g.tau;
  const auto& D = g.d;

  double rho2 = g.a + mu * g.b / r2_3;
  double rho1 = ((6.0 * (D[2][0] * t1 / t3 + D[1][0] * t / t3) * r2_3 +
                  mu * D[2][0] * (t * t - t1 * t1) * t1 / t3) /
                     (6.0 * r2_3 + mu * (t * t - t3 * t3)) -
                 D[0][0]) /
                g.d0;
  double rho3 = ((6.0 * (D[0][2] * t3 / t1 - D[1][2] * t / t1) * r2_3 +
                  mu * D[0][2] * (t * t - t3 * t3) * t3 / t1) /
                     (6.0 * r2_3 + mu * (t * t - t1 * t1)) -
                 D[2][2]) /
                g.d0;
  if (!(rho1 > 0.0 && rho2 > 0.0 && rho3 > 0.0)) return std::nullopt;

  auto positions = [&](double p1, double p2, double p3) {
    return std::array<Vec3, 3>{obs[0].site_eci + p1 * obs[0].los, obs[1].site_eci + p2 * obs[1].los,
                               obs[2].site_eci + p3 * obs[2].los};
  };
  std::array<Vec3, 3> r = positions(rho1, rho2, rho3);

  double f1 = 1.0 - 0.5 * mu * t1 * t1 / r2_3;
  double g1 = t1 - mu * t1 * t1 * t1 / (6.0 * r2_3);
  double f3 = 1.0 - 0.5 * mu * t3 * t3 / r2_3;
  double g3 = t3 - mu * t3 * t3 * t3 / (6.0 * r2_3);
  Vec3 v2 = (-f3 * r[0] + f1 * r[2]) / (f1 * g3 - f3 * g1);

  auto admit = [&](const OrbitState& st) -> std::optional<Candidate> {
    if (!st.position.allFinite() || !st.velocity.allFinite()) return std::nullopt;
    if (!(st.energy(mu) < 0.0) || !(st.position.norm() > options.min_radius)) return std::nullopt;
    for (std::size_t i = 0; i < 3; ++i) {
      if (!((propagate_position(st, obs[i].epoch - st.epoch, mu) - obs[i].site_eci).dot(obs[i].los) > 0.0)) {
        return std::nullopt;
      }
    }
    Candidate c;
    c.state = st;
    try {
      c.residual = los_residual(st, obs, mu);
    } catch (const Error&) {
      return std::nullopt;
    }
    return c;
  };
  std::optional<Candidate> best;
  auto offer = [&](const std::optional<OrbitState>& st) {
    if (!st) return;
    std::optional<Candidate> c;
    try {
      c = admit(*st);
    } catch (const Error&) {
      return;
    }
    if (c && (!best || c->residual < best->residual)) best = c;
  };
  const OrbitState series{obs[1].epoch, r[1], v2};
  offer(polish(obs, series, mu));

  bool settled = false;
  for (int it = 0; it < options.max_refinements; ++it) {
    LagrangeCoefficients c1;
    LagrangeCoefficients c3;
    try {
      c1 = kepler_coefficients(r[1], v2, t1, mu);
      c3 = kepler_coefficients(r[1], v2, t3, mu);
    } catch (const Error&) {
      break;
    }
    f1 = 0.5 * (f1 + c1.f);
    g1 = 0.5 * (g1 + c1.g);
    f3 = 0.5 * (f3 + c3.f);
    g3 = 0.5 * (g3 + c3.g);
    const double det = f1 * g3 - f3 * g1;
    const double k1 = g3 / det;
    const double k3 = -g1 / det;
    const double n1 = (-D[0][0] + D[1][0] / k1 - D[2][0] * k3 / k1) / g.d0;
    const double n2 = (-k1 * D[0][1] + D[1][1] - k3 * D[2][1]) / g.d0;
    const double n3 = (-k1 / k3 * D[0][2] + D[1][2] / k3 - D[2][2]) / g.d0;
    if (!std::isfinite(n1) || !std::isfinite(n2) || !std::isfinite(n3)) break;
    const double change = std::max({rel_change(n1, rho1), rel_change(n2, rho2), rel_change(n3, rho3)});
    rho1 = n1;
    rho2 = n2;
    rho3 = n3;
    r = positions(rho1, rho2, rho3);
    v2 = (-f3 * r[0] + f1 * r[2]) / det;
    if (change < options.tolerance) {
      settled = true;
      break;
    }
  }
  if (settled && rho1 > 0.0 && rho2 > 0.0 && rho3 > 0.0) {
    const OrbitState iterated{obs[1].epoch, r[1], v2};
    offer(iterated);
    offer(polish(obs, iterated, mu));
  }
  return best;
}

}  // namespace

double los_residual(const OrbitState& state, const std::array<LosObservation, 3>& obs, double mu) {
  double worst = 0.0;
  for (const LosObservation& o : obs) {
    const Vec3 p = propagate_position(state, o.epoch - state.epoch, mu);
    const Vec3 los = (p - o.site_eci).normalized();
    worst = std::max(worst, std::atan2(los.cross(o.los).norm(), los.dot(o.los)));
  }
  return worst;
}

OrbitState gauss_iod(const std::array<LosObservation, 3>& obs, double mu, const GaussOptions& options) {
  if (!(obs[0].epoch < obs[1].epoch && obs[1].epoch < obs[2].epoch)) {
    throw GeometryError("Gauss IOD needs strictly increasing epochs");
  }
  GaussSetup g;
  g.tau1 = obs[0].epoch - obs[1].epoch;
  g.tau3 = obs[2].epoch - obs[1].epoch;
  g.tau = g.tau3 - g.tau1;

  const Vec3 l1 = obs[0].los.normalized();
  const Vec3 l2 = obs[1].los.normalized();
  const Vec3 l3 = obs[2].los.normalized();
  const std::array<Vec3, 3> p{l2.cross(l3), l1.cross(l3), l1.cross(l2)};
  g.d0 = l1.dot(p[0]);
  if (!(std::abs(g.d0) > 1e-14)) throw GeometryError("lines of sight are coplanar");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) g.d[i][j] = obs[static_cast<std::size_t>(i)].site_eci.dot(p[static_cast<std::size_t>(j)]);
  }
  const auto& D = g.d;
  const double t1 = g.tau1;
  const double t3 = g.tau3;
  const double t = g.tau;
  g.a = (-D[0][1] * t3 / t + D[1][1] + D[2][1] * t1 / t) / g.d0;
  g.b = (D[0][1] * (t3 * t3 - t * t) * t3 / t + D[2][1] * (t * t - t1 * t1) * t1 / t) / (6.0 * g.d0);
  g.e = obs[1].site_eci.dot(l2);

  const double r2sq = obs[1].site_eci.squaredNorm();
  GaussPolynomial poly;
  poly.a = -(g.a * g.a + 2.0 * g.a * g.e + r2sq);
  poly.b = -2.0 * mu * g.b * (g.a + g.e);
  poly.c = -mu * mu * g.b * g.b;

  std::vector<double> roots = polynomial_roots(poly, options.min_radius);
  if (roots.empty()) throw GeometryError("no admissible root of the Gauss polynomial");
  std::sort(roots.begin(), roots.end(), [&](double x, double y) {
    return std::abs(x - options.preferred_radius) < std::abs(y - options.preferred_radius);
  });

  std::array<LosObservation, 3> unit = obs;
  unit[0].los = l1;
  unit[1].los = l2;
  unit[2].los = l3;

  constexpr double kAcceptResidual = 1e-6;  // rad
  std::optional<Candidate> best;
  for (double r2 : roots) {
    std::optional<Candidate> c = solve_for_root(unit, g, r2, mu, options);
    if (!c) continue;
    if (c->residual < kAcceptResidual) return c->state;
    if (!best || c->residual < best->residual) best = c;
  }
  if (!best) throw ConvergenceError("Gauss refinement found no bound solution");
  return best->state;
}

std::array<LosPick, 3> los_picks(const ObservationSet& obs) {
  const std::size_t m = obs.images.size();
  if (m == 0) throw InvalidArgument("no observations");
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return obs.images[a].window.start < obs.images[b].window.start;
  });
  if (m >= 3) {
    return {LosPick{order.front(), ExposureInstant::Start}, LosPick{order[m / 2], ExposureInstant::Start},
            LosPick{order.back(), ExposureInstant::Start}};
  }
  if (m == 2) {
    return {LosPick{order[0], ExposureInstant::Start}, LosPick{order[1], ExposureInstant::Start},
            LosPick{order[1], ExposureInstant::End}};
  }
  return {LosPick{0, ExposureInstant::Start}, LosPick{0, ExposureInstant::Middle},
          LosPick{0, ExposureInstant::End}};
}

const CameraFrame& frame_at(const StreakImage& img, ExposureInstant instant) {
  if (img.frames.empty()) throw InvalidArgument("image has no camera frames");
  switch (instant) {
    case ExposureInstant::Start: return img.frames.front();
    case ExposureInstant::End: return img.frames.back();
    case ExposureInstant::Middle: return img.frames[img.frames.size() / 2];
  }
  return img.frames.front();
}

namespace {

OrbitState to_initial_epoch(const OrbitState& s, double t_initial, double mu) {
  return propagate_kepler(s, t_initial - s.epoch, mu);
}

}  // namespace

OrbitState corner_init(const ObservationSet& obs, double mu) {
  const std::array<LosPick, 3> picks = los_picks(obs);
  std::array<LosObservation, 3> triple;
  for (std::size_t i = 0; i < 3; ++i) {
    const StreakImage& img = obs.images[picks[i].image];
    if (!img.start_corner) throw InvalidArgument("streak start corner metadata is missing");
    const CameraFrame& frame = frame_at(img, picks[i].instant);
    Vec2 pixel;
    switch (picks[i].instant) {
      case ExposureInstant::Start: pixel = corner_pixel(img.crop, *img.start_corner); break;
      case ExposureInstant::End: pixel = corner_pixel(img.crop, opposite(*img.start_corner)); break;
      case ExposureInstant::Middle:
        pixel = img.crop.origin() + 0.5 * Vec2(img.crop.width - 1, img.crop.height - 1);
        break;
    }
    triple[i] = LosObservation{frame.epoch(), frame.observer_eci(), pixel_to_los(pixel, frame)};
  }
  return to_initial_epoch(gauss_iod(triple, mu), obs.t_initial, mu);
}

double level_radius(InitLevel level) {
  switch (level) {
    case InitLevel::I: return 0.8;
    case InitLevel::II: return 25.0;
    case InitLevel::III: return 55.0;
    case InitLevel::IV: return 120.0;
    case InitLevel::V: return 160.0;
  }
  return 0.0;
}

OrbitState perturbed_endpoint_init(const OrbitState& truth, const ObservationSet& obs, double radius_px,
                                   std::mt19937_64& rng, int max_attempts, double mu) {
  const std::array<LosPick, 3> picks = los_picks(obs);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt < std::max(max_attempts, 1); ++attempt) {
    std::array<LosObservation, 3> triple;
    for (std::size_t i = 0; i < 3; ++i) {
      const CameraFrame& frame = frame_at(obs.images[picks[i].image], picks[i].instant);
      const Vec2 u = world_to_pixel(propagate_position(truth, frame.epoch() - truth.epoch, mu), frame);
      const double theta = angle(rng);
      const Vec2 perturbed = u + radius_px * Vec2(std::cos(theta), std::sin(theta));
      triple[i] = LosObservation{frame.epoch(), frame.observer_eci(), pixel_to_los(perturbed, frame)};
    }
    try {
      OrbitState s = to_initial_epoch(gauss_iod(triple, mu), obs.t_initial, mu);
      if (s.energy(mu) < 0.0) return s;
      last_error = "unbound solution";
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw ConvergenceError("perturbed-endpoint initialisation failed: " + last_error);
}

OrbitState degraded_init(const OrbitState& truth, const ObservationSet& obs, InitLevel level,
                         std::mt19937_64& rng, int max_attempts, double mu) {
  return perturbed_endpoint_init(truth, obs, level_radius(level), rng, max_attempts, mu);
}

}  // namespace streakfit
