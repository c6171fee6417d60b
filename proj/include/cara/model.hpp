#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cara {

// Tolerance for range checks on probabilities.
inline constexpr double kProbTol = 1e-12;

/// Per-node channel statistics: stationary probability of a good channel and
/// the two estimation error rates.
struct NodeChannelParams {
  double pi_good = 0.0;
  double eps_good = 0.0;  ///< P[estimated bad | truly good]
  double eps_bad = 0.0;   ///< P[estimated good | truly bad]

  double pi_bad() const { return 1.0 - pi_good; }
  double eps_good_bar() const { return 1.0 - eps_good; }
  double eps_bad_bar() const { return 1.0 - eps_bad; }

  /// P[truly good and estimated good]: the per-slot chance that the node both
  /// transmits under the channel-aware rule and can be decoded.
  double detected_good() const { return pi_good * eps_good_bar(); }

  /// P[truly bad but estimated good]: transmissions that only cause interference.
  double false_good() const { return pi_bad() * eps_bad; }

  bool operator==(const NodeChannelParams&) const = default;
};

/// Two-node multipacket reception probabilities. A transmitter whose own
/// channel is bad never succeeds, so only own-good cases are stored.
struct ReceptionProbs2 {
  double q1_solo = 0.0;       // q_{1|{G}}
  double q1_with_bad = 0.0;   // q_{1|{G,B}}
  double q1_with_good = 0.0;  // q_{1|{G,G}}
  double q2_solo = 0.0;       // q_{2|{G}}
  double q2_with_bad = 0.0;   // q_{2|{B,G}}
  double q2_with_good = 0.0;  // q_{2|{G,G}}

  bool operator==(const ReceptionProbs2&) const = default;
};

struct SystemParams {
  NodeChannelParams node1;
  NodeChannelParams node2;
  ReceptionProbs2 reception;

  /// 1-based node accessor.
  const NodeChannelParams& node(int i) const { return i == 1 ? node1 : node2; }
  double q_solo(int i) const { return i == 1 ? reception.q1_solo : reception.q2_solo; }
  double q_with_bad(int i) const { return i == 1 ? reception.q1_with_bad : reception.q2_with_bad; }
  double q_with_good(int i) const { return i == 1 ? reception.q1_with_good : reception.q2_with_good; }

  bool operator==(const SystemParams&) const = default;
};

struct TransmitProbs {
  double p1 = 0.0;
  double p2 = 0.0;
  double operator[](int i) const { return i == 1 ? p1 : p2; }
  bool operator==(const TransmitProbs&) const = default;
};

struct ArrivalRates {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool operator==(const ArrivalRates&) const = default;
};

struct LcqNode {
  double pi_good = 0.0;
  double eps_good = 0.0;
  double q_solo = 0.0;

  double detected_good() const { return pi_good * (1.0 - eps_good); }
  bool operator==(const LcqNode&) const = default;
};

/// Parameters for the centralized scheduler with an arbitrary number of nodes.
struct LcqSystemParams {
  std::vector<LcqNode> nodes;

  std::size_t size() const { return nodes.size(); }
  bool operator==(const LcqSystemParams&) const = default;
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }

  std::string to_string() const {
    if (ok()) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) {
      if (i) os << "; ";
      os << issues[i].field << ": " << issues[i].message;
    }
    return os.str();
  }
};

struct ValidationOptions {
  /// Accept equality in the reception-probability ordering.
  bool allow_degenerate = false;
};

class InvalidParams : public std::invalid_argument {
 public:
  explicit InvalidParams(ValidationReport report)
      : std::invalid_argument("invalid parameters: " + report.to_string()),
        report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

namespace detail {

inline void check_probability(ValidationReport& r, const std::string& field, double v) {
  if (!(v >= -kProbTol && v <= 1.0 + kProbTol)) {
    std::ostringstream os;
    os << "value " << v << " outside [0,1]";
    r.issues.push_back({field, os.str()});
  }
}

inline void check_order(ValidationReport& r, const std::string& hi_name, double hi,
                        const std::string& lo_name, double lo, bool allow_equal) {
  const bool good = allow_equal ? hi >= lo : hi > lo;
  if (!good) {
    std::ostringstream os;
    os << hi_name << " (" << hi << ") must be " << (allow_equal ? ">=" : ">") << " " << lo_name
       << " (" << lo << ")";
    r.issues.push_back({hi_name, os.str()});
  }
}

inline void check_node(ValidationReport& r, const std::string& prefix, const NodeChannelParams& n) {
  check_probability(r, prefix + ".pi_good", n.pi_good);
  check_probability(r, prefix + ".eps_good", n.eps_good);
  check_probability(r, prefix + ".eps_bad", n.eps_bad);
}

}  // namespace detail

/// Checks ranges and the reception ordering q_solo > q_with_bad > q_with_good.
/// q_solo must also be positive: a node that cannot succeed alone has an empty
/// region and every normalized quantity divides by it.
inline ValidationReport validate(const SystemParams& params, ValidationOptions opts = {}) {
  ValidationReport r;
  detail::check_node(r, "node1", params.node1);
  detail::check_node(r, "node2", params.node2);

  const auto& q = params.reception;
  detail::check_probability(r, "reception.q1_solo", q.q1_solo);
  detail::check_probability(r, "reception.q1_with_bad", q.q1_with_bad);
  detail::check_probability(r, "reception.q1_with_good", q.q1_with_good);
  detail::check_probability(r, "reception.q2_solo", q.q2_solo);
  detail::check_probability(r, "reception.q2_with_bad", q.q2_with_bad);
  detail::check_probability(r, "reception.q2_with_good", q.q2_with_good);

  const bool eq = opts.allow_degenerate;
  detail::check_order(r, "reception.q1_solo", q.q1_solo, "reception.q1_with_bad", q.q1_with_bad, eq);
  detail::check_order(r, "reception.q1_with_bad", q.q1_with_bad, "reception.q1_with_good",
                      q.q1_with_good, eq);
  detail::check_order(r, "reception.q2_solo", q.q2_solo, "reception.q2_with_bad", q.q2_with_bad, eq);
  detail::check_order(r, "reception.q2_with_bad", q.q2_with_bad, "reception.q2_with_good",
                      q.q2_with_good, eq);

  if (!(q.q1_solo > 0.0)) r.issues.push_back({"reception.q1_solo", "must be positive"});
  if (!(q.q2_solo > 0.0)) r.issues.push_back({"reception.q2_solo", "must be positive"});
  return r;
}

inline ValidationReport validate(const LcqSystemParams& params) {
  ValidationReport r;
  if (params.nodes.empty()) r.issues.push_back({"nodes", "at least one node required"});
  for (std::size_t i = 0; i < params.nodes.size(); ++i) {
    const std::string prefix = "nodes[" + std::to_string(i) + "]";
    detail::check_probability(r, prefix + ".pi_good", params.nodes[i].pi_good);
    detail::check_probability(r, prefix + ".eps_good", params.nodes[i].eps_good);
    detail::check_probability(r, prefix + ".q_solo", params.nodes[i].q_solo);
    if (!(params.nodes[i].q_solo > 0.0))
      r.issues.push_back({prefix + ".q_solo", "must be positive"});
  }
  return r;
}

inline void require_valid(const SystemParams& params, ValidationOptions opts = {}) {
  auto report = validate(params, opts);
  if (!report.ok()) throw InvalidParams(std::move(report));
}

inline void require_valid(const LcqSystemParams& params) {
  auto report = validate(params);
  if (!report.ok()) throw InvalidParams(std::move(report));
}

/// Relabels node 1 as node 2 and vice versa. q_{1|{G,B}} (node 1 good, other
/// bad) becomes q_{2|{B,G}} and so on.
inline SystemParams swap_nodes(const SystemParams& p) {
  SystemParams s;
  s.node1 = p.node2;
  s.node2 = p.node1;
  s.reception.q1_solo = p.reception.q2_solo;
  s.reception.q1_with_bad = p.reception.q2_with_bad;
  s.reception.q1_with_good = p.reception.q2_with_good;
  s.reception.q2_solo = p.reception.q1_solo;
  s.reception.q2_with_bad = p.reception.q1_with_bad;
  s.reception.q2_with_good = p.reception.q1_with_good;
  return s;
}

inline ArrivalRates swapped(const ArrivalRates& r) { return {r.lambda2, r.lambda1}; }
inline TransmitProbs swapped(const TransmitProbs& p) { return {p.p2, p.p1}; }

/// The scheduler only needs the solo success probability and the chance of a
/// correctly detected good channel.
inline LcqSystemParams to_lcq(const SystemParams& p) {
  return LcqSystemParams{{{p.node1.pi_good, p.node1.eps_good, p.reception.q1_solo},
                          {p.node2.pi_good, p.node2.eps_good, p.reception.q2_solo}}};
}

/// Same channel and reception statistics with perfect estimation.
inline SystemParams with_perfect_csi(SystemParams p) {
  p.node1.eps_good = p.node1.eps_bad = 0.0;
  p.node2.eps_good = p.node2.eps_bad = 0.0;
  return p;
}

}  // namespace cara
