#pragma once

// MAP changepoint filtering over articulation models. Observations y[0..T-1] are indexed by
// changepoint times τ ∈ [0, T]; a segment (s, t] holds y[s..t-1], and each of its
// observations y[i] with i >= 1 is predicted from y[i-1] and a[i-1].

#include "hkin/error.hpp"
#include "hkin/mlesac.hpp"
#include "hkin/models.hpp"
#include "hkin/resample.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

namespace hkin {

/// Truncated geometric distribution over segment lengths [min_len, max_len].
struct SegmentLengthPrior {
  double p = 0.01;
  int min_len = 10;
  int max_len = 10000;

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw InputError("segment prior p must be in (0, 1)");
    if (min_len < 2) throw InputError("segment prior min_len must be >= 2");
    if (max_len < min_len) throw InputError("segment prior max_len must be >= min_len");
  }

  /// ln β(n).
  double log_beta(int n) const {
    if (n < min_len || n > max_len) return -std::numeric_limits<double>::infinity();
    return std::log(p) + (n - min_len) * std::log1p(-p) - log_normalizer();
  }

  /// ln(1 - B(n)), B being the cumulative distribution.
  double log_survival(int n) const {
    if (n < min_len) return 0.0;
    if (n >= max_len) return -std::numeric_limits<double>::infinity();
    const double l1p = std::log1p(-p);
    return (n - min_len + 1) * l1p + std::log1p(-std::exp((max_len - n) * l1p)) - log_normalizer();
  }

 private:
  double log_normalizer() const { return std::log1p(-std::exp((max_len - min_len + 1) * std::log1p(-p))); }
};

enum class InferenceMode { ActionConditional, ObservationOnly };

struct DetectSettings {
  SegmentLengthPrior prior;
  NoiseModel noise;
  FitSettings fit;
  int max_particles = 100;
  int refit_stride = 10;  // steps between fresh segment fits; 1 = exact evidence
  std::uint64_t seed = 0;
  InferenceMode mode = InferenceMode::ActionConditional;

  void validate() const {
    prior.validate();
    noise.validate();
    if (max_particles < 1) throw InputError("max_particles must be >= 1");
    if (refit_stride < 1) throw InputError("refit_stride must be >= 1");
    if (fit.iterations < 1) throw InputError("MLESAC iterations must be >= 1");
    if (fit.refine_steps < 0) throw InputError("refinement steps must be >= 0");
  }
};

struct Segment {
  int t0 = 0;
  int t1 = 0;
  ArticulationModel model;
  double gamma = 0.0;
  double log_evidence = 0.0;
};

struct Segmentation {
  std::vector<int> tau;
  std::vector<Segment> segments;
  double log_map_score = 0.0;

  std::size_t changepoint_count() const { return tau.size() < 2 ? 0 : tau.size() - 2; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

inline const double kLogModelPrior = -std::log(3.0);

}  // namespace detail

/// Fits and scores candidate segments of one series. Optionally memoizes fits so that several
/// inference passes over the same data share identical evidence values.
class SegmentScorer {
 public:
  SegmentScorer(std::span<const Pose> y, std::span<const Pose> a, const NoiseModel& noise, const FitSettings& fit,
                std::uint64_t seed, InferenceMode mode, bool memoize = false)
      : y_(y.begin(), y.end()), noise_(noise), om_(noise), fit_(fit), seed_(seed), memoize_(memoize) {
    if (a.size() + 1 != y.size()) throw InputError("series needs exactly one action per transition");
    if (mode == InferenceMode::ObservationOnly) {
      a_.assign(a.size(), Pose::identity());
    } else {
      a_.assign(a.begin(), a.end());
    }
  }

  int length() const { return static_cast<int>(y_.size()); }

  /// MLESAC fit of segment (s, t]; empty when no non-degenerate hypothesis exists.
  std::optional<FitResult> fit(ModelKind kind, int s, int t) {
    if (!memoize_) return compute(kind, s, t);
    const std::uint64_t key = (static_cast<std::uint64_t>(s) << 34) | (static_cast<std::uint64_t>(t) << 2) |
                              static_cast<std::uint64_t>(kind);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(key, compute(kind, s, t)).first->second;
  }

  /// Mixture log-likelihood of observation i (>= 1) under a fitted segment model. The outlier
  /// probability is floored at the nominal rate: the fit has not seen observation i yet.
  double term(const std::optional<FitResult>& f, int i, PredictorState& st) const {
    if (!f) return -std::numeric_limits<double>::infinity();
    const auto k = static_cast<std::size_t>(i);
    return om_.mixture(gated_log_gaussian(f->model, om_, y_[k - 1], a_[k - 1], y_[k], st),
                       std::max(f->gamma, noise_.outlier_probability));
  }

  static double evidence(const std::optional<FitResult>& f, double loglik, ModelKind kind, int length) {
    if (!f) return -std::numeric_limits<double>::infinity();
    return loglik - bic_penalty(kind, length);
  }

 private:
  std::optional<FitResult> compute(ModelKind kind, int s, int t) const {
    const std::size_t first = static_cast<std::size_t>(std::max(s, 1) - 1);
    const std::size_t count = static_cast<std::size_t>(t) - first;
    const std::span<const Pose> yw(y_.data() + first, count);
    const std::span<const Pose> aw(a_.data() + first, count - 1);
    std::uint64_t h = detail::splitmix64(seed_);
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(s));
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(t));
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(kind));
    try {
      return fit_mlesac(kind, yw, aw, noise_, h, fit_, s == 0 ? 0 : 1);
    } catch (const FitError&) {
      return std::nullopt;
    }
  }

  std::vector<Pose> y_;
  std::vector<Pose> a_;
  NoiseModel noise_;
  ObservationModel om_;
  FitSettings fit_;
  std::uint64_t seed_;
  bool memoize_;
  std::unordered_map<std::uint64_t, std::optional<FitResult>> cache_;
};

namespace detail {

struct MapEntry {
  double score = -std::numeric_limits<double>::infinity();
  int s = -1;
  ModelKind kind = ModelKind::Rigid;
  std::optional<FitResult> fit;
  double evidence = 0.0;
};

inline void check_length(int T, const SegmentLengthPrior& prior) {
  if (T < 2 * prior.min_len)
    throw InputError("series of length " + std::to_string(T) + " is shorter than 2 * min_len = " +
                     std::to_string(2 * prior.min_len));
}

inline Segmentation backtrace(const std::vector<MapEntry>& map, int T) {
  if (!std::isfinite(map[static_cast<std::size_t>(T)].score))
    throw InferenceError("no admissible segmentation reaches the end of the series", T);
  Segmentation out;
  out.log_map_score = map[static_cast<std::size_t>(T)].score;
  for (int t = T; t > 0;) {
    const MapEntry& e = map[static_cast<std::size_t>(t)];
    out.segments.push_back({e.s, t, e.fit->model, e.fit->gamma, e.evidence});
    t = e.s;
  }
  std::reverse(out.segments.begin(), out.segments.end());
  out.tau.push_back(0);
  for (const auto& s : out.segments) out.tau.push_back(s.t1);
  return out;
}

// A support point s of the filter: the hypothesis that the latest changepoint happened at s.
struct Particle {
  int s = 0;
  double prefix = 0.0;          // ln P^MAP_s
  double resample_offset = 0.0; // log weight adjustment from earlier resampling
  struct PerKind {
    std::optional<FitResult> fit;
    int fitted_t = -1;
    double loglik = 0.0;
    PredictorState state;
  };
  std::array<PerKind, 3> kinds;
  double log_weight = -std::numeric_limits<double>::infinity();
};

}  // namespace detail

/// Online MAP changepoint detection with a particle cap and stratified optimal resampling.
/// Particles whose segment is still shorter than min_len carry no evidence yet and are exempt
/// from the cap.
inline Segmentation detect(SegmentScorer& scorer, const DetectSettings& settings) {
  settings.validate();
  const SegmentLengthPrior& prior = settings.prior;
  const int T = scorer.length();
  detail::check_length(T, prior);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<detail::MapEntry> map(static_cast<std::size_t>(T) + 1);
  map[0].score = 0.0;
  std::vector<detail::Particle> particles;
  particles.push_back({0, 0.0, 0.0, {}, kNegInf});
  std::mt19937_64 rng(detail::splitmix64(settings.seed ^ 0x5e5a3b1eULL));
  std::vector<double> ev(3);

  for (int t = 1; t <= T; ++t) {
    std::erase_if(particles, [&](const detail::Particle& p) { return t - p.s > prior.max_len; });
    detail::MapEntry best;
    // descending s so that ties go to the latest changepoint
    for (auto it = particles.rbegin(); it != particles.rend(); ++it) {
      detail::Particle& p = *it;
      const int n = t - p.s;
      if (n < prior.min_len) continue;
      for (std::size_t k = 0; k < 3; ++k) {
        const ModelKind kind = kAllKinds[k];
        auto& st = p.kinds[k];
        if (st.fitted_t < 0 || t - st.fitted_t >= settings.refit_stride) {
          st.fit = scorer.fit(kind, p.s, t);
          st.fitted_t = t;
          st.loglik = st.fit ? st.fit->loglik : kNegInf;
          if (st.fit) st.state = st.fit->tail;
        } else {
          st.loglik += scorer.term(st.fit, t - 1, st.state);
        }
        ev[k] = SegmentScorer::evidence(st.fit, st.loglik, kind, n);
        const double cand = prior.log_beta(n) + ev[k] + detail::kLogModelPrior + p.prefix;
        if (cand > best.score) best = {cand, p.s, kind, st.fit, ev[k]};
      }
      p.log_weight = prior.log_survival(n - 1) + detail::log_sum_exp(ev) + detail::kLogModelPrior + p.prefix;
    }
    map[static_cast<std::size_t>(t)] = best;

    if (t >= prior.min_len && T - t >= prior.min_len && std::isfinite(best.score)) {
      particles.push_back({t, best.score, 0.0, {}, kNegInf});
    }

    // prune the particles that carry evidence
    std::vector<std::size_t> mature;
    for (std::size_t i = 0; i < particles.size(); ++i) {
      if (t - particles[i].s >= prior.min_len) mature.push_back(i);
    }
    std::vector<std::size_t> alive;
    for (std::size_t i : mature) {
      if (std::isfinite(particles[i].log_weight)) alive.push_back(i);
    }
    std::vector<bool> keep(particles.size(), true);
    for (std::size_t i : mature) keep[i] = false;
    if (alive.size() > static_cast<std::size_t>(settings.max_particles)) {
      double hi = kNegInf;
      for (std::size_t i : alive) hi = std::max(hi, particles[i].log_weight + particles[i].resample_offset);
      std::vector<double> w;
      w.reserve(alive.size());
      for (std::size_t i : alive) w.push_back(std::exp(particles[i].log_weight + particles[i].resample_offset - hi));
      for (const Survivor& sv : stratified_optimal_resample(w, static_cast<std::size_t>(settings.max_particles), rng)) {
        detail::Particle& p = particles[alive[sv.index]];
        if (sv.weight != w[sv.index]) p.resample_offset = std::log(sv.weight) + hi - p.log_weight;
        keep[alive[sv.index]] = true;
      }
    } else {
      for (std::size_t i : alive) keep[i] = true;
    }
    std::size_t write = 0;
    for (std::size_t i = 0; i < particles.size(); ++i) {
      if (keep[i]) particles[write++] = std::move(particles[i]);
    }
    particles.resize(write);
    if (particles.empty() && t < T) throw InferenceError("all particles died", t);
  }
  return detail::backtrace(map, T);
}

inline Segmentation detect(std::span<const Pose> y, std::span<const Pose> a, const DetectSettings& settings) {
  settings.validate();
  SegmentScorer scorer(y, a, settings.noise, settings.fit, settings.seed, settings.mode);
  return detect(scorer, settings);
}

/// Exact MAP segmentation by dynamic programming over every (s, t) pair, using fresh fits for
/// every candidate segment. Tie rules match `detect`.
inline Segmentation exhaustive_map(SegmentScorer& scorer, const SegmentLengthPrior& prior) {
  prior.validate();
  const int T = scorer.length();
  if (T > 500) throw InputError("exhaustive search is limited to series of length <= 500");
  detail::check_length(T, prior);
  std::vector<detail::MapEntry> map(static_cast<std::size_t>(T) + 1);
  map[0].score = 0.0;
  for (int t = prior.min_len; t <= T; ++t) {
    detail::MapEntry best;
    for (int s = t - prior.min_len; s >= std::max(0, t - prior.max_len); --s) {
      if (s != 0 && (s < prior.min_len || T - s < prior.min_len)) continue;
      const double prefix = map[static_cast<std::size_t>(s)].score;
      if (!std::isfinite(prefix)) continue;
      for (ModelKind kind : kAllKinds) {
        auto f = scorer.fit(kind, s, t);
        const double e = SegmentScorer::evidence(f, f ? f->loglik : 0.0, kind, t - s);
        const double cand = prior.log_beta(t - s) + e + detail::kLogModelPrior + prefix;
        if (cand > best.score) best = {cand, s, kind, f, e};
      }
    }
    map[static_cast<std::size_t>(t)] = best;
  }
  return detail::backtrace(map, T);
}

inline Segmentation exhaustive_map(std::span<const Pose> y, std::span<const Pose> a, const DetectSettings& settings) {
  settings.validate();
  SegmentScorer scorer(y, a, settings.noise, settings.fit, settings.seed, settings.mode);
  return exhaustive_map(scorer, settings.prior);
}

struct ConfigurationalSegment {
  double c_start = 0.0;
  double c_end = 0.0;
  ArticulationModel model;
};

/// Maps each segment to the configurations of its first and last observation.
inline std::vector<ConfigurationalSegment> to_configurational(const Segmentation& seg, std::span<const Pose> y) {
  std::vector<ConfigurationalSegment> out;
  out.reserve(seg.segments.size());
  for (const Segment& s : seg.segments) {
    if (s.t0 < 0 || s.t1 <= s.t0 || static_cast<std::size_t>(s.t1) > y.size())
      throw InputError("segmentation does not match the series length");
    out.push_back({inverse_kinematics(s.model, y[static_cast<std::size_t>(s.t0)]),
                   inverse_kinematics(s.model, y[static_cast<std::size_t>(s.t1 - 1)]), s.model});
  }
  return out;
}

}  // namespace hkin
