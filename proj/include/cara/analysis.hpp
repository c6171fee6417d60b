#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cara/model.hpp"

// Closed-form stability analysis for two-node channel-aware random access with
// estimation errors and multipacket reception, the no-CSI ALOHA baseline and the
// centralized longest-connected-queue scheduler.
//
// All functions expect parameters that already passed validate(); they do not
// re-validate so that degenerate (allow_degenerate) inputs can be analyzed.

namespace cara {

inline constexpr double kShapeTol = 1e-12;
inline constexpr std::size_t kMaxLcqNodes = 20;

struct PsiPair {
  double psi1 = 0.0;
  double psi2 = 0.0;
};

/// Interference penalties: the expected loss in a node's solo success
/// probability caused by the other node transmitting under its estimate.
inline PsiPair compute_psi(const SystemParams& s) {
  const auto& n1 = s.node1;
  const auto& n2 = s.node2;
  const auto& q = s.reception;
  return {n2.detected_good() * (q.q1_solo - q.q1_with_good) +
              n2.false_good() * (q.q1_solo - q.q1_with_bad),
          n1.detected_good() * (q.q2_solo - q.q2_with_good) +
              n1.false_good() * (q.q2_solo - q.q2_with_bad)};
}

// ---------------------------------------------------------------------------
// Dominant system (node 2 keeps transmitting dummy packets when empty)

class UnstableDominantQueue : public std::domain_error {
 public:
  UnstableDominantQueue(double lambda1, double mu1)
      : std::domain_error("node-1 queue of the dominant system is unstable: lambda1=" +
                          std::to_string(lambda1) + " >= mu1=" + std::to_string(mu1)),
        lambda1_(lambda1),
        mu1_(mu1) {}
  double lambda1() const { return lambda1_; }
  double mu1() const { return mu1_; }

 private:
  double lambda1_;
  double mu1_;
};

struct DominantRates {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double empty1 = 0.0;  ///< Pr[Q1 = 0] = 1 - lambda1 / mu1
};

/// Node-1 service rate when node 2 always behaves as backlogged.
inline double dominant_mu1(const SystemParams& s, const TransmitProbs& p) {
  const auto psi = compute_psi(s);
  return s.node1.detected_good() * p.p1 * (s.reception.q1_solo - psi.psi1 * p.p2);
}

/// Node-2 service rate in the dominant system. Independent of p1; only
/// meaningful while lambda1 is below the node-1 service rate.
inline double dominant_mu2(const SystemParams& s, double p2, double lambda1) {
  const auto psi = compute_psi(s);
  const double busy_scale = s.node1.detected_good() * (s.reception.q1_solo - psi.psi1 * p2);
  return s.node2.detected_good() * p2 * (s.reception.q2_solo - psi.psi2 * lambda1 / busy_scale);
}

/// Throws UnstableDominantQueue when lambda1 >= mu1.
inline DominantRates dominant_service_rates(const SystemParams& s, const TransmitProbs& p,
                                            double lambda1) {
  const double mu1 = dominant_mu1(s, p);
  if (!(lambda1 < mu1)) throw UnstableDominantQueue(lambda1, mu1);
  return {mu1, dominant_mu2(s, p.p2, lambda1), 1.0 - lambda1 / mu1};
}

// ---------------------------------------------------------------------------
// Fixed-p region: union of the two dominant-system subregions.

namespace detail {

// Subregion where node 2 is the dummy transmitter.
inline bool in_node2_dominant_region(const SystemParams& s, const TransmitProbs& p, double l1,
                                     double l2) {
  const double mu1 = dominant_mu1(s, p);
  if (!(l1 < mu1)) return false;
  return l2 < dominant_mu2(s, p.p2, l1);
}

}  // namespace detail

/// Membership in the stability region for fixed transmission probabilities.
/// Strict inequalities; with tol > 0 the point must stay inside after being
/// pushed by tol in both coordinates.
inline bool fixed_p_region_contains(const SystemParams& s, const TransmitProbs& p,
                                    const ArrivalRates& rates, double tol = 0.0) {
  const double l1 = rates.lambda1 + tol;
  const double l2 = rates.lambda2 + tol;
  if (detail::in_node2_dominant_region(s, p, l1, l2)) return true;
  return detail::in_node2_dominant_region(swap_nodes(s), swapped(p), l2, l1);
}

// ---------------------------------------------------------------------------
// Optimization of p2 for a given lambda1 (p1 = 1 is always optimal).

enum class P2Regime {
  AtOne,            ///< mu2 non-decreasing on the feasible set, p2* = 1
  Interior,         ///< stationary point of the concave objective
  ConstraintBound,  ///< node-1 stability binds; supremum approached as p2 -> bound
  AtZero,           ///< no p keeps node 1 stable (lambda1 >= PX), mu2 = 0
};

inline const char* to_string(P2Regime r) {
  switch (r) {
    case P2Regime::AtOne: return "at_one";
    case P2Regime::Interior: return "interior";
    case P2Regime::ConstraintBound: return "constraint_bound";
    case P2Regime::AtZero: return "at_zero";
  }
  return "?";
}

struct ClampedOptimum {
  double p2_star = 0.0;
  P2Regime regime = P2Regime::AtZero;
  double mu2 = 0.0;  ///< sup over p of the node-2 service rate at this lambda1
};

/// Range endpoints are compared against lambda1 directly; nothing is searched.
inline ClampedOptimum optimal_p2(const SystemParams& s, double lambda1) {
  const auto psi = compute_psi(s);
  const double a = s.node1.detected_good();
  const double b = s.node2.detected_good();
  const double q1 = s.reception.q1_solo;
  const double q2 = s.reception.q2_solo;

  if (!(lambda1 < a * q1)) return {0.0, P2Regime::AtZero, 0.0};

  const double inf = std::numeric_limits<double>::infinity();
  // Left end of the range where the unconstrained stationary point lies in (0,1).
  const double interior_lo =
      psi.psi2 > 0.0 ? a * q2 * (q1 - psi.psi1) * (q1 - psi.psi1) / (psi.psi2 * q1) : inf;
  // Largest lambda1 for which the stationary point still satisfies lambda1 < mu1.
  const double interior_hi = a * psi.psi2 * q1 / q2;
  const double p2_one_limit = a * (q1 - psi.psi1);

  if (lambda1 <= std::min(interior_lo, p2_one_limit))
    return {1.0, P2Regime::AtOne, b * (q2 - psi.psi2 * lambda1 / p2_one_limit)};

  if (lambda1 < interior_hi) {
    const double p2 = (q1 - std::sqrt(psi.psi2 * q1 * lambda1 / (a * q2))) / psi.psi1;
    return {p2, P2Regime::Interior, dominant_mu2(s, p2, lambda1)};
  }

  // lambda1 = a (q1 - psi1 p2) at the bound, so mu2 = b p2 (q2 - psi2).
  const double bound = (q1 - lambda1 / a) / psi.psi1;
  return {bound, P2Regime::ConstraintBound, b * bound * (q2 - psi.psi2)};
}

// ---------------------------------------------------------------------------
// Region boundaries

enum class RegionShape { NonConvex, ConvexPolygon, RightTriangle };

inline const char* to_string(RegionShape s) {
  switch (s) {
    case RegionShape::NonConvex: return "non_convex";
    case RegionShape::ConvexPolygon: return "convex_polygon";
    case RegionShape::RightTriangle: return "right_triangle";
  }
  return "?";
}

enum class SegmentKind { Line, Curve };

inline const char* to_string(SegmentKind k) { return k == SegmentKind::Line ? "line" : "curve"; }

struct Point {
  double x = 0.0;  // lambda1
  double y = 0.0;  // lambda2
};

struct BoundaryVertex {
  SegmentKind segment = SegmentKind::Line;
  Point point;
};

/// Frontier shared by the channel-aware region and the ALOHA baseline. Both are
/// described in coordinates x = lambda1 / scale1, y = lambda2 / scale2 by solo
/// success levels s1, s2 and interference penalties d1, d2:
///   frontier = PY -> P1 -> (curve) -> P2 -> PX     when d1/s1 + d2/s2 >= 1
///   frontier = PY -> P3 -> PX                       otherwise
/// with curve sqrt(d2 x) + sqrt(d1 y) = sqrt(s1 s2).
class RegionBoundary {
 public:
  RegionBoundary(double scale1, double scale2, double s1, double s2, double d1, double d2)
      : scale1_(scale1), scale2_(scale2), s1_(s1), s2_(s2), d1_(d1), d2_(d2) {
    const double sum = shape_sum();
    if (sum > 1.0 + kShapeTol)
      shape_ = RegionShape::NonConvex;
    else if (sum >= 1.0 - kShapeTol)
      shape_ = RegionShape::RightTriangle;
    else
      shape_ = RegionShape::ConvexPolygon;

    px_ = {scale1 * s1, 0.0};
    py_ = {0.0, scale2 * s2};
    has_curve_ = shape_ != RegionShape::ConvexPolygon && d1 > 0.0 && d2 > 0.0;
    if (has_curve_) {
      p1_ = Point{scale1 * s2 * (s1 - d1) * (s1 - d1) / (d2 * s1), scale2 * d1 * s2 / s1};
      p2_ = Point{scale1 * d2 * s1 / s2, scale2 * s1 * (s2 - d2) * (s2 - d2) / (d1 * s2)};
    }
    if (shape_ != RegionShape::NonConvex) p3_ = Point{scale1 * (s1 - d1), scale2 * (s2 - d2)};
  }

  RegionShape shape() const { return shape_; }
  double shape_sum() const { return d1_ / s1_ + d2_ / s2_; }

  /// Three-segment description applies (sum >= 1 within tolerance).
  bool has_curve() const { return has_curve_; }

  Point px() const { return px_; }
  Point py() const { return py_; }
  std::optional<Point> p1() const { return p1_; }
  std::optional<Point> p2() const { return p2_; }
  std::optional<Point> p3() const { return p3_; }

  /// lambda2 on the curve for a given lambda1 (only meaningful on [P1.x, P2.x]).
  double curve_lambda2(double lambda1) const {
    const double root = std::sqrt(s1_ * s2_) - std::sqrt(d2_ * lambda1 / scale1_);
    return scale2_ * root * root / d1_;
  }

  /// Frontier height at lambda1; 0 at and beyond PX.
  double frontier(double lambda1) const {
    if (scale1_ <= 0.0 || scale2_ <= 0.0) return 0.0;
    const double x = std::max(lambda1, 0.0);
    if (x >= px_.x) return 0.0;
    if (has_curve()) {
      if (x <= p1_->x) return interpolate(py_, *p1_, x);
      if (x >= p2_->x) return interpolate(*p2_, px_, x);
      return curve_lambda2(x);
    }
    if (x <= p3_->x) return interpolate(py_, *p3_, x);
    return interpolate(*p3_, px_, x);
  }

  /// Strictly below the frontier; tol pushes the point outward in both
  /// coordinates before testing.
  bool contains(const ArrivalRates& r, double tol = 0.0) const {
    const double l1 = r.lambda1 + tol;
    const double l2 = r.lambda2 + tol;
    if (!(l1 < px_.x)) return false;
    return l2 < frontier(l1);
  }

  /// Ordered frontier vertices from PY to PX. Each segment lists its own
  /// endpoints, so shared anchors appear once per segment.
  std::vector<BoundaryVertex> vertices(std::size_t curve_samples = 512) const {
    std::vector<BoundaryVertex> out;
    auto line = [&](Point a, Point b) {
      out.push_back({SegmentKind::Line, a});
      out.push_back({SegmentKind::Line, b});
    };
    if (has_curve()) {
      line(py_, *p1_);
      const std::size_t n = std::max<std::size_t>(curve_samples, 2);
      for (std::size_t k = 0; k < n; ++k) {
        double x = p1_->x + (p2_->x - p1_->x) * static_cast<double>(k) / static_cast<double>(n - 1);
        Point pt{x, curve_lambda2(x)};
        if (k == 0) pt = *p1_;
        if (k == n - 1) pt = *p2_;
        out.push_back({SegmentKind::Curve, pt});
      }
      line(*p2_, px_);
    } else {
      line(py_, *p3_);
      line(*p3_, px_);
    }
    return out;
  }

 private:
  static double interpolate(Point a, Point b, double x) {
    if (b.x == a.x) return std::min(a.y, b.y);
    return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
  }

  double scale1_, scale2_, s1_, s2_, d1_, d2_;
  RegionShape shape_ = RegionShape::ConvexPolygon;
  bool has_curve_ = false;
  Point px_, py_;
  std::optional<Point> p1_, p2_, p3_;
};

/// Frontier of the union of fixed-p regions over all p in [0,1]^2.
inline RegionBoundary closure_boundary(const SystemParams& s) {
  const auto psi = compute_psi(s);
  return RegionBoundary(s.node1.detected_good(), s.node2.detected_good(), s.reception.q1_solo,
                        s.reception.q2_solo, psi.psi1, psi.psi2);
}

inline bool closure_region_contains(const SystemParams& s, const ArrivalRates& r,
                                    double tol = 0.0) {
  return closure_boundary(s).contains(r, tol);
}

inline double shape_sum(const SystemParams& s) {
  const auto psi = compute_psi(s);
  return psi.psi1 / s.reception.q1_solo + psi.psi2 / s.reception.q2_solo;
}

inline RegionShape classify_shape(const SystemParams& s) { return closure_boundary(s).shape(); }

// ---------------------------------------------------------------------------
// ALOHA without CSI

struct AlohaDerived {
  double q1_s = 0.0, q1_m = 0.0;
  double q2_s = 0.0, q2_m = 0.0;
  double delta1 = 0.0, delta2 = 0.0;
};

class NonPositiveAlohaGap : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Success probabilities averaged over the stationary channel law, alone (s)
/// and together with the other node (m). No sign check on the gaps.
inline AlohaDerived aloha_success_probs(const SystemParams& s) {
  const double pi1 = s.node1.pi_good, pi2 = s.node2.pi_good;
  const auto& q = s.reception;
  AlohaDerived d;
  d.q1_s = pi1 * q.q1_solo;
  d.q1_m = pi1 * pi2 * q.q1_with_good + pi1 * (1.0 - pi2) * q.q1_with_bad;
  d.q2_s = pi2 * q.q2_solo;
  d.q2_m = pi1 * pi2 * q.q2_with_good + (1.0 - pi1) * pi2 * q.q2_with_bad;
  d.delta1 = d.q1_s - d.q1_m;
  d.delta2 = d.q2_s - d.q2_m;
  return d;
}

/// As aloha_success_probs, but throws NonPositiveAlohaGap when q_s <= q_m for
/// either node; the baseline region is undefined there.
inline AlohaDerived aloha_derived(const SystemParams& s) {
  const auto d = aloha_success_probs(s);
  if (!(d.delta1 > 0.0) || !(d.delta2 > 0.0))
    throw NonPositiveAlohaGap("ALOHA success gap must be positive (delta1=" +
                              std::to_string(d.delta1) + ", delta2=" + std::to_string(d.delta2) +
                              ")");
  return d;
}

inline RegionBoundary aloha_boundary(const SystemParams& s) {
  const auto d = aloha_derived(s);
  return RegionBoundary(1.0, 1.0, d.q1_s, d.q2_s, d.delta1, d.delta2);
}

inline bool aloha_region_contains(const SystemParams& s, const ArrivalRates& r, double tol = 0.0) {
  return aloha_boundary(s).contains(r, tol);
}

// ---------------------------------------------------------------------------
// Centralized longest-connected-queue scheduling

/// 1 - prod_{i in subset} (1 - pi_i^G (1 - eps_i^G)) for the bitmask subset.
inline double lcq_subset_bound(const LcqSystemParams& s, std::uint32_t mask) {
  double none_connected = 1.0;
  for (std::size_t i = 0; i < s.nodes.size(); ++i)
    if (mask & (1u << i)) none_connected *= 1.0 - s.nodes[i].detected_good();
  return 1.0 - none_connected;
}

/// Checks every non-empty subset of nodes (2^N - 1 constraints).
inline bool lcq_region_contains(const LcqSystemParams& s, std::span<const double> rates) {
  const std::size_t n = s.nodes.size();
  if (n > kMaxLcqNodes)
    throw std::invalid_argument("LCQ region check supports at most " +
                                std::to_string(kMaxLcqNodes) + " nodes, got " + std::to_string(n));
  if (rates.size() != n)
    throw std::invalid_argument("rate vector length " + std::to_string(rates.size()) +
                                " does not match node count " + std::to_string(n));

  std::vector<double> load(n);
  for (std::size_t i = 0; i < n; ++i) load[i] = rates[i] / s.nodes[i].q_solo;

  const std::uint32_t full = (1u << n) - 1u;
  for (std::uint32_t mask = 1; mask <= full; ++mask) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) lhs += load[i];
    if (!(lhs < lcq_subset_bound(s, mask))) return false;
  }
  return true;
}

inline bool lcq_region_contains(const LcqSystemParams& s, const ArrivalRates& r) {
  const double rates[2] = {r.lambda1, r.lambda2};
  return lcq_region_contains(s, std::span<const double>(rates, 2));
}

/// Two-node LCQ frontier: PY, the two corners on the sum constraint, PX.
inline std::vector<BoundaryVertex> lcq_boundary(const LcqSystemParams& s) {
  if (s.nodes.size() != 2)
    throw std::invalid_argument("LCQ boundary export needs exactly two nodes");
  const double a = s.nodes[0].detected_good(), b = s.nodes[1].detected_good();
  const double q1 = s.nodes[0].q_solo, q2 = s.nodes[1].q_solo;
  const std::vector<Point> corners{
      {0.0, b * q2}, {a * (1.0 - b) * q1, b * q2}, {a * q1, b * (1.0 - a) * q2}, {a * q1, 0.0}};
  std::vector<BoundaryVertex> out;
  for (std::size_t k = 0; k + 1 < corners.size(); ++k) {
    out.push_back({SegmentKind::Line, corners[k]});
    out.push_back({SegmentKind::Line, corners[k + 1]});
  }
  return out;
}

/// Left-hand side of the test for the vertex P3 lying strictly inside the
/// two-node LCQ region.
inline double lcq_vertex_condition(const SystemParams& s) {
  const auto psi = compute_psi(s);
  return psi.psi1 / (s.node2.detected_good() * s.reception.q1_solo) +
         psi.psi2 / (s.node1.detected_good() * s.reception.q2_solo);
}

/// False means part of the channel-aware region is unreachable by the
/// centralized scheduler.
inline bool cara_subset_of_lcq(const SystemParams& s) {
  if (classify_shape(s) == RegionShape::NonConvex) return true;
  return lcq_vertex_condition(s) > 1.0;
}

}  // namespace cara
