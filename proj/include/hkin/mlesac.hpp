#pragma once

// Sample-consensus fitting of articulation models scored by data likelihood, followed by a
// damped Gauss-Newton refinement and a per-segment fit of the outlier probability.

#include "hkin/error.hpp"
#include "hkin/geometry.hpp"
#include "hkin/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hkin {

struct FitSettings {
  int iterations = 100;
  int refine_steps = 10;
  double step_tolerance = 1e-10;
  int score_subsample = 32;  // hypotheses are ranked on at most this many evenly spaced terms; 0 = all
};

struct FitResult {
  ArticulationModel model;
  double gamma = 0.0;   // fitted outlier probability
  double loglik = 0.0;  // sequence log-likelihood at (θ̂, γ̂), prior term included
  PredictorState tail;  // predictor carry-over after the last observation
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline std::optional<ArticulationModel> minimal_hypothesis(ModelKind kind, std::span<const Pose* const> s) {
  switch (kind) {
    case ModelKind::Rigid: return ArticulationModel::rigid(*s[0]);
    case ModelKind::Prismatic: {
      const Vec3 d = s[1]->translation() - s[0]->translation();
      if (d.norm() < 1e-9) return std::nullopt;
      return ArticulationModel::prismatic(*s[0], d);
    }
    case ModelKind::Revolute: {
      const Vec3& p1 = s[0]->translation();
      const Vec3 a = p1 - s[2]->translation();
      const Vec3 b = s[1]->translation() - s[2]->translation();
      const Vec3 axb = a.cross(b);
      const double na = a.norm();
      const double nb = b.norm();
      if (na < 1e-9 || nb < 1e-9 || axb.norm() <= 1e-9 * na * nb) return std::nullopt;
      // circumcenter of the three points
      const Vec3 center =
          s[2]->translation() + (a.squaredNorm() * b - b.squaredNorm() * a).cross(axb) / (2.0 * axb.squaredNorm());
      const Vec3 x = p1 - center;
      const double radius = x.norm();
      if (!std::isfinite(radius) || radius < 1e-9) return std::nullopt;
      Eigen::Matrix3d frame;
      frame.col(0) = x / radius;
      frame.col(2) = axb.normalized();
      frame.col(1) = frame.col(2).cross(frame.col(0));
      const Pose c(center, Quat(frame));
      return ArticulationModel::revolute(c, radius, c.rotation().conjugate() * s[0]->rotation());
    }
  }
  return std::nullopt;
}

inline int refine_dof(ModelKind kind) {
  switch (kind) {
    case ModelKind::Rigid: return 6;
    case ModelKind::Prismatic: return 8;
    case ModelKind::Revolute: return 10;
  }
  return 0;
}

// Local chart around a model: translation and left rotation of the base frame, plus the
// kind-specific parameters.
struct Chart {
  ArticulationModel base;
  Vec3 e1 = Vec3::UnitY();
  Vec3 e2 = Vec3::UnitZ();

  explicit Chart(const ArticulationModel& m) : base(m) {
    if (m.kind() == ModelKind::Prismatic) {
      const Vec3& ax = m.as_prismatic().axis;
      e1 = any_orthogonal(ax);
      e2 = ax.cross(e1);
    }
  }

  static Pose move(const Pose& p, const double* d) {
    return {p.translation() + Vec3(d[0], d[1], d[2]), quat_from_rotation_vector(Vec3(d[3], d[4], d[5])) * p.rotation()};
  }

  ArticulationModel apply(const Eigen::VectorXd& d) const {
    switch (base.kind()) {
      case ModelKind::Rigid: return ArticulationModel::rigid(move(base.as_rigid().offset, d.data()));
      case ModelKind::Prismatic: {
        const auto& p = base.as_prismatic();
        return ArticulationModel::prismatic(move(p.origin, d.data()), p.axis + d[6] * e1 + d[7] * e2);
      }
      case ModelKind::Revolute: {
        const auto& r = base.as_revolute();
        return ArticulationModel::revolute(
            move(r.center, d.data()), std::max(0.0, r.radius + d[6]),
            r.orientation_offset * quat_from_rotation_vector(Vec3(d[7], d[8], d[9])));
      }
    }
    return base;
  }
};

// Per-observation Gaussian log densities of y[k] (k >= 1) against the model prediction.
inline void gaussian_terms(const ArticulationModel& m, std::span<const Pose> y, std::span<const Pose> a,
                           const ObservationModel& om, std::vector<double>& out, PredictorState* tail = nullptr) {
  out.resize(y.size() - 1);
  PredictorState st;
  for (std::size_t k = 1; k < y.size(); ++k) out[k - 1] = gated_log_gaussian(m, om, y[k - 1], a[k - 1], y[k], st);
  if (tail) *tail = st;
}

inline double mixture_sum(std::span<const double> g, const ObservationModel& om, double gamma) {
  double s = 0.0;
  for (double v : g) s += om.mixture(v, gamma);
  return s;
}

// Mixture log-likelihood at γ with early exit once the best achievable total drops below
// `floor`; returns -inf on exit.
inline double score_with_bailout(const ArticulationModel& m, std::span<const Pose> y, std::span<const Pose> a,
                                 const ObservationModel& om, double gamma, double floor) {
  const double per_term_max = om.mixture(om.log_mode(), gamma);
  const std::size_t n = y.size() - 1;
  double s = 0.0;
  PredictorState st;
  for (std::size_t k = 1; k < y.size(); ++k) {
    s += om.mixture(gated_log_gaussian(m, om, y[k - 1], a[k - 1], y[k], st), gamma);
    if (s + static_cast<double>(n - k) * per_term_max < floor) return kNegInf;
  }
  return s;
}

// Same bound on a fixed subset of terms, each predicted from its recorded predecessor.
inline double score_subset_with_bailout(const ArticulationModel& m, std::span<const Pose> y, std::span<const Pose> a,
                                        std::span<const std::size_t> idx, const ObservationModel& om, double gamma,
                                        double floor) {
  const double per_term_max = om.mixture(om.log_mode(), gamma);
  double s = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const std::size_t k = idx[j];
    s += om.mixture(om.log_gaussian(y[k], predict(m, y[k - 1], a[k - 1])), gamma);
    if (s + static_cast<double>(idx.size() - j - 1) * per_term_max < floor) return kNegInf;
  }
  return s;
}

inline void weighted_residuals(const ArticulationModel& m, std::span<const Pose> y, std::span<const Pose> a,
                               std::span<const double> sqrt_w, double inv_sigma_t, double inv_sigma_r,
                               const ObservationModel& om, Eigen::VectorXd& r) {
  r.resize(6 * static_cast<Eigen::Index>(y.size() - 1));
  PredictorState st;
  for (std::size_t k = 1; k < y.size(); ++k) {
    gated_log_gaussian(m, om, y[k - 1], a[k - 1], y[k], st);
    const Pose& p = st.last_prediction;
    const double w = sqrt_w[k - 1];
    const auto row = static_cast<Eigen::Index>(6 * (k - 1));
    r.segment<3>(row) = (y[k].translation() - p.translation()) * (w * inv_sigma_t);
    r.segment<3>(row + 3) = rotation_vector(p.rotation().conjugate() * y[k].rotation()) * (w * inv_sigma_r);
  }
}

// Levenberg-Marquardt on inlier-weighted residuals; accepts only steps that raise the
// mixture likelihood at γ.
inline ArticulationModel refine(ArticulationModel model, std::span<const Pose> y, std::span<const Pose> a,
                                const ObservationModel& om, double gamma, const FitSettings& fs) {
  const NoiseModel& n = om.noise();
  const double inv_t = 1.0 / std::sqrt(n.translational_variance);
  const double inv_r = 1.0 / std::sqrt(n.angular_variance);
  const int dof = refine_dof(model.kind());
  std::vector<double> g;
  std::vector<double> sqrt_w(y.size() - 1);
  gaussian_terms(model, y, a, om, g);
  double objective = mixture_sum(g, om, gamma);
  double lambda = 1e-3;
  Eigen::VectorXd r;
  Eigen::VectorXd r_step;
  Eigen::MatrixXd jac(6 * static_cast<Eigen::Index>(y.size() - 1), dof);
  constexpr double h = 1e-7;

  for (int step = 0; step < fs.refine_steps; ++step) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double resp = gamma <= 0.0 ? 1.0 : std::exp(std::log1p(-gamma) + g[k] - om.mixture(g[k], gamma));
      sqrt_w[k] = std::sqrt(std::clamp(resp, 0.0, 1.0));
    }
    const Chart chart(model);
    weighted_residuals(model, y, a, sqrt_w, inv_t, inv_r, om, r);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(dof);
    for (int p = 0; p < dof; ++p) {
      d[p] = h;
      weighted_residuals(chart.apply(d), y, a, sqrt_w, inv_t, inv_r, om, r_step);
      jac.col(p) = (r_step - r) / h;
      d[p] = 0.0;
    }
    const Eigen::MatrixXd hess = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    bool accepted = false;
    double gain = 0.0;
    Eigen::VectorXd delta;
    for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
      Eigen::MatrixXd damped = hess;
      damped.diagonal() += lambda * hess.diagonal() + Eigen::VectorXd::Constant(dof, 1e-12);
      delta = damped.ldlt().solve(-grad);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const ArticulationModel trial = chart.apply(delta);
      std::vector<double> g_trial;
      gaussian_terms(trial, y, a, om, g_trial);
      const double obj = mixture_sum(g_trial, om, gamma);
      if (obj > objective) {
        gain = obj - objective;
        model = trial;
        g = std::move(g_trial);
        objective = obj;
        lambda = std::max(lambda * 0.1, 1e-9);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted || delta.norm() < fs.step_tolerance || gain < 1e-3) break;
  }
  return model;
}

// Golden-section maximization of Σ ln((1-γ)N_k + γ/U) - wγ over γ ∈ [0, 1]; γ = 0 and
// γ = 1 are also evaluated exactly.
inline double fit_outlier_probability(std::span<const double> g, const ObservationModel& om) {
  const auto objective = [&](double gamma) { return mixture_sum(g, om, gamma) + om.log_prior(gamma); };
  constexpr double inv_phi = 0.6180339887498949;
  double lo = 0.0;
  double hi = 1.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    }
  }
  double best = 0.5 * (lo + hi);
  double f_best = objective(best);
  for (double edge : {0.0, 1.0}) {
    const double f = objective(edge);
    if (f >= f_best) {
      best = edge;
      f_best = f;
    }
  }
  return best;
}

// Re-anchors the configuration so that y[anchor] maps to 0 and y.back() to c >= 0.
// Predictions are unchanged; only the chart on the manifold moves.
inline ArticulationModel normalize_chart(const ArticulationModel& m, std::span<const Pose> y, std::size_t anchor) {
  switch (m.kind()) {
    case ModelKind::Rigid: return m;
    case ModelKind::Prismatic: {
      const auto& p = m.as_prismatic();
      const double c0 = inverse_kinematics(m, y[anchor]);
      ArticulationModel out =
          ArticulationModel::prismatic(Pose(p.origin.translation() + c0 * p.axis, p.origin.rotation()), p.axis);
      if (inverse_kinematics(out, y.back()) < 0.0) {
        out = ArticulationModel::prismatic(out.as_prismatic().origin, -p.axis);
      }
      return out;
    }
    case ModelKind::Revolute: {
      const auto& r = m.as_revolute();
      const double c0 = inverse_kinematics(m, y[anchor]);
      const Quat spin(Eigen::AngleAxisd(c0, Vec3::UnitZ()));
      ArticulationModel out = ArticulationModel::revolute(
          Pose(r.center.translation(), r.center.rotation() * spin), r.radius, r.orientation_offset);
      if (inverse_kinematics(out, y.back()) < 0.0) {
        const Quat flip(Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitX()));
        const auto& o = out.as_revolute();
        out = ArticulationModel::revolute(Pose(o.center.translation(), o.center.rotation() * flip), o.radius,
                                          flip * o.orientation_offset);
      }
      return out;
    }
  }
  return m;
}

inline std::uint64_t binomial_capped(std::uint64_t n, int k, std::uint64_t cap) {
  std::uint64_t c = 1;
  for (int i = 0; i < k; ++i) {
    c = c * (n - static_cast<std::uint64_t>(i)) / static_cast<std::uint64_t>(i + 1);
    if (c > cap) return cap + 1;
  }
  return c;
}

}  // namespace detail

/// MLESAC fit of one model kind to a segment.
///
/// `y[k]` is predicted from `y[k-1]` and `a[k-1]`, so `a.size() == y.size() - 1`.
/// Observations before `sample_begin` condition the first prediction but belong to the
/// previous segment: they are never drawn into a minimal set, and the configuration chart is
/// anchored at `y[sample_begin]`. Hypotheses are scored at the noise model's nominal γ; the
/// best one is refined and then γ is re-fit. Deterministic given `seed`.
inline FitResult fit_mlesac(ModelKind kind, std::span<const Pose> y, std::span<const Pose> a, const NoiseModel& noise,
                            std::uint64_t seed, const FitSettings& settings = {}, std::size_t sample_begin = 0) {
  if (y.size() < 2 || a.size() + 1 != y.size()) throw InputError("fit needs y.size() >= 2 and a.size() == y.size() - 1");
  const ObservationModel om(noise);
  const int k = minimal_sample_size(kind);
  if (sample_begin >= y.size() || y.size() - sample_begin < static_cast<std::size_t>(k))
    throw FitError("too few samples for a " + std::string(to_string(kind)) + " fit");

  const std::size_t pool = y.size() - sample_begin;
  const double gamma0 = noise.outlier_probability;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(static_cast<std::size_t>(k));
  std::array<const Pose*, 3> picks{};

  std::vector<std::size_t> subset;
  const std::size_t terms = y.size() - 1;
  if (settings.score_subsample > 0 && terms > static_cast<std::size_t>(settings.score_subsample)) {
    const auto m = static_cast<std::size_t>(settings.score_subsample);
    for (std::size_t j = 0; j < m; ++j) subset.push_back(1 + j * (terms - 1) / (m - 1));
  }

  std::optional<ArticulationModel> best;
  double best_score = detail::kNegInf;
  const auto consider = [&](std::span<const std::size_t> chosen) {
    for (std::size_t i = 0; i < chosen.size(); ++i) picks[i] = &y[sample_begin + chosen[i]];
    auto h = detail::minimal_hypothesis(kind, std::span<const Pose* const>(picks.data(), chosen.size()));
    if (!h) return;
    const double s = subset.empty() ? detail::score_with_bailout(*h, y, a, om, gamma0, best_score)
                                    : detail::score_subset_with_bailout(*h, y, a, subset, om, gamma0, best_score);
    if (s > best_score || (!best && s == best_score)) {
      best_score = s;
      best = std::move(h);
    }
  };

  const auto total = detail::binomial_capped(pool, k, static_cast<std::uint64_t>(std::max(settings.iterations, 1)));
  if (total <= static_cast<std::uint64_t>(settings.iterations)) {
    // small pool: enumerate every minimal set in a seeded order
    std::vector<std::vector<std::size_t>> sets;
    std::vector<std::size_t> cur(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) cur[i] = i;
    while (true) {
      sets.push_back(cur);
      int pos = k - 1;
      while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == pool - static_cast<std::size_t>(k - pos)) --pos;
      if (pos < 0) break;
      ++cur[static_cast<std::size_t>(pos)];
      for (int q = pos + 1; q < k; ++q) cur[static_cast<std::size_t>(q)] = cur[static_cast<std::size_t>(q - 1)] + 1;
    }
    std::shuffle(sets.begin(), sets.end(), rng);
    for (const auto& s : sets) consider(s);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    for (int it = 0; it < settings.iterations; ++it) {
      for (int i = 0; i < k; ++i) {
        std::size_t v = 0;
        do {
          v = pick(rng);
        } while (std::find(idx.begin(), idx.begin() + i, v) != idx.begin() + i);
        idx[static_cast<std::size_t>(i)] = v;
      }
      consider(idx);
    }
  }
  if (!best) throw FitError("every minimal sample set was degenerate for a " + std::string(to_string(kind)) + " fit");

  ArticulationModel model = detail::refine(*best, y, a, om, gamma0, settings);
  model = detail::normalize_chart(model, y, sample_begin);
  std::vector<double> g;
  PredictorState tail;
  detail::gaussian_terms(model, y, a, om, g, &tail);
  const double gamma = detail::fit_outlier_probability(g, om);
  return {model, gamma, detail::mixture_sum(g, om, gamma) + om.log_prior(gamma), tail};
}

/// ½·k_q·ln(length).
inline double bic_penalty(ModelKind kind, int segment_length) {
  return 0.5 * parameter_count(kind) * std::log(static_cast<double>(segment_length));
}

/// BIC-penalized log evidence ln L ≈ ln p(y | θ̂, a) - ½ k_q ln(length) of a segment whose
/// length is `y.size() - sample_begin` observations.
inline double model_evidence(ModelKind kind, std::span<const Pose> y, std::span<const Pose> a,
                             const NoiseModel& noise, const FitSettings& settings, std::uint64_t seed,
                             std::size_t sample_begin = 0) {
  const FitResult fit = fit_mlesac(kind, y, a, noise, seed, settings, sample_begin);
  return fit.loglik - bic_penalty(kind, static_cast<int>(y.size() - sample_begin));
}

}  // namespace hkin
