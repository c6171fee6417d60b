#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cara/model.hpp"
#include "cara/philox.hpp"

// Slotted-time simulator of the two-node channel-aware random access system and
// of the centralized longest-connected-queue scheduler.
//
// Per slot: draw true channels, draw estimates, let the policy pick
// transmitters, resolve receptions, then Q(n+1) = max(Q(n) - departures, 0) + A(n).
// Every random draw is addressed by (seed, purpose, node, slot), so two runs
// with the same seed see the same arrivals, channels, estimates and coins.

namespace cara {

enum class PolicyKind {
  Cara,          ///< transmit w.p. p_i when estimated good and backlogged
  CaraDominant,  ///< as Cara, but the dominant node also sends dummies when empty
  Aloha,         ///< transmit w.p. p_i when backlogged, estimates ignored
  Lcq,           ///< centralized: serve the longest connected queue
};

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Cara: return "cara";
    case PolicyKind::CaraDominant: return "cara_dominant";
    case PolicyKind::Aloha: return "aloha";
    case PolicyKind::Lcq: return "lcq";
  }
  return "?";
}

struct Policy {
  PolicyKind kind = PolicyKind::Cara;
  int dominant_node = 2;  ///< 1-based; used by CaraDominant only

  static Policy cara() { return {PolicyKind::Cara, 2}; }
  static Policy dominant(int node) { return {PolicyKind::CaraDominant, node}; }
  static Policy aloha() { return {PolicyKind::Aloha, 2}; }
  static Policy lcq() { return {PolicyKind::Lcq, 2}; }

  bool operator==(const Policy&) const = default;
};

enum class ChannelMode { IidStationary, TwoStateMarkov };

struct ChannelProcessSpec {
  ChannelMode mode = ChannelMode::IidStationary;
  /// Per-node persistence in [0,1); empty means 0 for every node.
  std::vector<double> persistence;

  double persistence_of(std::size_t node) const {
    if (mode == ChannelMode::IidStationary || persistence.empty()) return 0.0;
    return persistence.at(node);
  }

  bool operator==(const ChannelProcessSpec&) const = default;
};

struct MarkovTransitions {
  double good_to_good = 0.0;
  double bad_to_good = 0.0;
};

/// Two-state chain with stationary P[good] = pi_good. Persistence rho mixes
/// "keep the previous state" with a fresh stationary draw: P = rho I + (1-rho) 1 pi.
inline MarkovTransitions markov_transitions(double pi_good, double persistence) {
  return {persistence + (1.0 - persistence) * pi_good, (1.0 - persistence) * pi_good};
}

struct SimConfig {
  std::variant<SystemParams, LcqSystemParams> params;
  ValidationOptions validation;
  Policy policy;
  TransmitProbs p;            ///< unused by Lcq
  std::vector<double> rates;  ///< one Bernoulli arrival rate per node
  ChannelProcessSpec channel;
  std::uint64_t horizon = 1'000'000;
  std::optional<std::uint64_t> warmup;  ///< default: 1% of horizon
  std::uint64_t seed = 0;
  std::uint64_t queue_cap = 1'000'000;
  std::size_t trace_slots = 0;  ///< record at most this many leading slots
  std::size_t batches = 50;     ///< batch count for standard errors

  std::uint64_t effective_warmup() const { return warmup.value_or(horizon / 100); }
  std::size_t node_count() const {
    return std::holds_alternative<SystemParams>(params)
               ? 2
               : std::get<LcqSystemParams>(params).nodes.size();
  }
};

class InvalidSimConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate_config(const SimConfig& c) {
  auto fail = [](const std::string& m) { throw InvalidSimConfig("invalid simulation config: " + m); };

  if (const auto* sp = std::get_if<SystemParams>(&c.params)) {
    if (auto r = validate(*sp, c.validation); !r.ok()) fail(r.to_string());
  } else {
    const auto& lp = std::get<LcqSystemParams>(c.params);
    if (auto r = validate(lp); !r.ok()) fail(r.to_string());
    if (c.policy.kind != PolicyKind::Lcq) fail("only the lcq policy accepts N-node parameters");
  }
  if (c.policy.kind == PolicyKind::CaraDominant &&
      (c.policy.dominant_node != 1 && c.policy.dominant_node != 2))
    fail("dominant node must be 1 or 2");

  const std::size_t n = c.node_count();
  if (c.rates.size() != n)
    fail("expected " + std::to_string(n) + " arrival rates, got " + std::to_string(c.rates.size()));
  for (double r : c.rates)
    if (!(r >= 0.0 && r <= 1.0)) fail("arrival rate " + std::to_string(r) + " outside [0,1]");
  if (c.policy.kind != PolicyKind::Lcq) {
    if (!(c.p.p1 >= 0.0 && c.p.p1 <= 1.0) || !(c.p.p2 >= 0.0 && c.p.p2 <= 1.0))
      fail("transmission probabilities must lie in [0,1]");
  }
  if (c.horizon == 0 || !(c.horizon > c.effective_warmup())) fail("horizon must exceed warmup");
  if (c.channel.mode == ChannelMode::TwoStateMarkov && !c.channel.persistence.empty()) {
    if (c.channel.persistence.size() != n) fail("persistence needs one value per node");
    for (double r : c.channel.persistence)
      if (!(r >= 0.0 && r < 1.0)) fail("persistence must lie in [0,1)");
  }
  if (c.batches == 0) fail("batches must be positive");
}

enum class Verdict { Stable, Unstable, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct VerdictThresholds {
  double slope_tol = 1e-4;   ///< packets/slot
  double empty_min = 0.01;
};

inline Verdict stability_verdict(double queue_slope, double empty_fraction, bool cap_hit,
                                 const VerdictThresholds& t = {}) {
  if (cap_hit || queue_slope > t.slope_tol) return Verdict::Unstable;
  if (queue_slope < -t.slope_tol) return Verdict::Stable;
  if (empty_fraction > t.empty_min) return Verdict::Stable;
  return Verdict::Inconclusive;
}

struct NodeStats {
  // Post-warmup rates.
  double empirical_arrival_rate = 0.0;
  /// Successes (real or dummy) per slot in which the node had something to
  /// send: a non-empty queue, or always for the dummy-sending node.
  double empirical_service_rate = 0.0;
  double service_rate_stderr = 0.0;  ///< batch-means standard error
  double departure_rate = 0.0;       ///< real packets delivered per slot
  double empty_fraction = 0.0;
  double mean_queue = 0.0;
  double queue_slope = 0.0;  ///< least-squares slope of Q over the window
  Verdict verdict = Verdict::Inconclusive;

  // Whole-run counters (conservation: arrivals = departures + final - initial).
  std::uint64_t arrivals_total = 0;
  std::uint64_t departures_total = 0;
  std::uint64_t initial_queue = 0;
  std::uint64_t final_queue = 0;

  // Whole-run channel and estimator counters.
  std::uint64_t good_slots = 0;
  std::uint64_t good_estimated_bad = 0;
  std::uint64_t bad_slots = 0;
  std::uint64_t bad_estimated_good = 0;
};

struct SimStats {
  std::vector<NodeStats> nodes;
  Verdict verdict = Verdict::Inconclusive;
  bool cap_hit = false;
  std::uint64_t slots_run = 0;
  std::uint64_t window_slots = 0;  ///< post-warmup slots
};

/// System verdict: Unstable if any node is, Stable if all are.
inline Verdict stability_verdict(const SimStats& s, const VerdictThresholds& t = {}) {
  bool all_stable = true;
  for (const auto& n : s.nodes) {
    const Verdict v = stability_verdict(n.queue_slope, n.empty_fraction, s.cap_hit, t);
    if (v == Verdict::Unstable) return Verdict::Unstable;
    all_stable = all_stable && v == Verdict::Stable;
  }
  return all_stable ? Verdict::Stable : Verdict::Inconclusive;
}

struct NodeSlot {
  bool channel_good = false;
  bool estimated_good = false;
  bool connected = false;  ///< truly good and correctly estimated
  bool transmit = false;
  bool dummy = false;      ///< transmission from an empty queue
  bool scheduled = false;  ///< Lcq only
  bool success = false;
  bool arrival = false;
  std::uint64_t queue = 0;  ///< at the start of the slot
};

struct SlotRecord {
  std::uint64_t slot = 0;
  std::vector<NodeSlot> nodes;
};

using SlotTrace = std::vector<SlotRecord>;

/// Step-wise simulator. run() is the usual entry point; stepping directly is
/// what lets two systems be compared slot by slot.
class Simulator {
 public:
  explicit Simulator(SimConfig config) : cfg_(std::move(config)), streams_(cfg_.seed) {
    validate_config(cfg_);
    build_nodes();
    const std::size_t n = nodes_.size();
    queue_.assign(n, 0);
    good_.assign(n, false);
    slot_.assign(n, NodeSlot{});
    acc_.assign(n, Accum{});
    warmup_ = cfg_.effective_warmup();
    window_ = cfg_.horizon - warmup_;
    batch_len_ = std::max<std::uint64_t>(window_ / cfg_.batches, 1);
    for (auto& a : acc_) a.batches.assign(cfg_.batches + 1, {});
  }

  const SimConfig& config() const { return cfg_; }
  std::uint64_t slot() const { return now_; }
  bool done() const { return now_ >= cfg_.horizon || cap_hit_; }
  bool cap_hit() const { return cap_hit_; }
  std::span<const std::uint64_t> queues() const { return queue_; }

  /// Advances one slot. The per-node record of the slot is available from
  /// last_slot() afterwards.
  void step() {
    const std::size_t n = nodes_.size();
    const std::uint64_t t = now_;
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = slot_[i];
      s = NodeSlot{};
      s.queue = queue_[i];
      draw_channel(i, t);
      s.channel_good = good_[i];
      const double ue = streams_.uniform(StreamTag::Estimate, node_id(i), t);
      s.estimated_good = good_[i] ? !(ue < nodes_[i].eps_good) : (ue < nodes_[i].eps_bad);
      s.connected = s.channel_good && s.estimated_good;
      s.arrival = streams_.uniform(StreamTag::Arrival, node_id(i), t) < cfg_.rates[i];
    }

    decide_transmitters(t);
    resolve_receptions(t);

    const bool in_window = t >= warmup_;
    const std::uint64_t rel = t - std::min(t, warmup_);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = slot_[i];
      auto& a = acc_[i];
      if (s.channel_good) {
        ++a.good_slots;
        if (!s.estimated_good) ++a.good_estimated_bad;
      } else {
        ++a.bad_slots;
        if (s.estimated_good) ++a.bad_estimated_good;
      }

      const bool departure = s.success && !s.dummy;
      if (in_window) {
        const bool eligible = s.queue > 0 || sends_dummies(i);
        const double q = static_cast<double>(s.queue);
        const auto tt = static_cast<long double>(rel);
        a.arrivals += s.arrival;
        a.departures += departure;
        a.successes += s.success && eligible;
        a.eligible += eligible;
        a.empty += s.queue == 0;
        a.sum_q += q;
        a.sum_tq += tt * q;
        auto& b = a.batches[std::min<std::uint64_t>(rel / batch_len_, cfg_.batches)];
        b.successes += s.success && eligible;
        b.eligible += eligible;
      }
      a.arrivals_total += s.arrival;
      a.departures_total += departure;
      queue_[i] = queue_[i] - (departure ? 1 : 0) + (s.arrival ? 1 : 0);
      if (queue_[i] > cfg_.queue_cap) cap_hit_ = true;
    }
    ++now_;
  }

  std::span<const NodeSlot> last_slot() const { return slot_; }

  SimStats stats() const {
    SimStats out;
    out.cap_hit = cap_hit_;
    out.slots_run = now_;
    const std::uint64_t window = now_ > warmup_ ? now_ - warmup_ : 0;
    out.window_slots = window;
    const double w = static_cast<double>(window);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& a = acc_[i];
      NodeStats ns;
      if (window > 0) {
        ns.empirical_arrival_rate = static_cast<double>(a.arrivals) / w;
        ns.departure_rate = static_cast<double>(a.departures) / w;
        ns.empty_fraction = static_cast<double>(a.empty) / w;
        ns.mean_queue = a.sum_q / w;
        ns.queue_slope = least_squares_slope(a, window);
      }
      if (a.eligible > 0)
        ns.empirical_service_rate =
            static_cast<double>(a.successes) / static_cast<double>(a.eligible);
      ns.service_rate_stderr = batch_stderr(a);
      ns.verdict = stability_verdict(ns.queue_slope, ns.empty_fraction, cap_hit_);
      ns.arrivals_total = a.arrivals_total;
      ns.departures_total = a.departures_total;
      ns.initial_queue = 0;
      ns.final_queue = queue_[i];
      ns.good_slots = a.good_slots;
      ns.good_estimated_bad = a.good_estimated_bad;
      ns.bad_slots = a.bad_slots;
      ns.bad_estimated_good = a.bad_estimated_good;
      out.nodes.push_back(ns);
    }
    out.verdict = stability_verdict(out);
    return out;
  }

 private:
  struct NodeModel {
    double pi_good = 0.0, eps_good = 0.0, eps_bad = 0.0;
    double q_solo = 0.0, q_with_bad = 0.0, q_with_good = 0.0;
    double p = 0.0;
    MarkovTransitions markov;
  };

  struct Batch {
    std::uint64_t successes = 0;
    std::uint64_t eligible = 0;
  };

  struct Accum {
    std::uint64_t arrivals = 0, departures = 0, successes = 0, eligible = 0, empty = 0;
    double sum_q = 0.0;
    long double sum_tq = 0.0L;
    std::vector<Batch> batches;
    std::uint64_t arrivals_total = 0, departures_total = 0;
    std::uint64_t good_slots = 0, good_estimated_bad = 0, bad_slots = 0, bad_estimated_good = 0;
  };

  static std::uint32_t node_id(std::size_t i) { return static_cast<std::uint32_t>(i); }

  void build_nodes() {
    if (const auto* sp = std::get_if<SystemParams>(&cfg_.params)) {
      for (int i = 1; i <= 2; ++i) {
        const auto& nc = sp->node(i);
        nodes_.push_back({nc.pi_good, nc.eps_good, nc.eps_bad, sp->q_solo(i), sp->q_with_bad(i),
                          sp->q_with_good(i), cfg_.p[i], {}});
      }
    } else {
      for (const auto& ln : std::get<LcqSystemParams>(cfg_.params).nodes)
        nodes_.push_back({ln.pi_good, ln.eps_good, 0.0, ln.q_solo, 0.0, 0.0, 0.0, {}});
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      nodes_[i].markov = markov_transitions(nodes_[i].pi_good, cfg_.channel.persistence_of(i));
  }

  bool sends_dummies(std::size_t i) const {
    return cfg_.policy.kind == PolicyKind::CaraDominant &&
           static_cast<int>(i) + 1 == cfg_.policy.dominant_node;
  }

  void draw_channel(std::size_t i, std::uint64_t t) {
    const double u = streams_.uniform(StreamTag::Channel, node_id(i), t);
    if (cfg_.channel.mode == ChannelMode::IidStationary) {
      good_[i] = u < nodes_[i].pi_good;
    } else if (t == 0) {
      // Start the chain in its stationary law.
      good_[i] = streams_.uniform(StreamTag::ChannelInit, node_id(i), 0) < nodes_[i].pi_good;
    } else {
      const auto& m = nodes_[i].markov;
      good_[i] = u < (good_[i] ? m.good_to_good : m.bad_to_good);
    }
  }

  void decide_transmitters(std::uint64_t t) {
    const std::size_t n = nodes_.size();
    if (cfg_.policy.kind == PolicyKind::Lcq) {
      std::uint64_t longest = 0;
      std::size_t ties = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!slot_[i].connected || slot_[i].queue == 0) continue;
        if (slot_[i].queue > longest) {
          longest = slot_[i].queue;
          ties = 1;
        } else if (slot_[i].queue == longest) {
          ++ties;
        }
      }
      if (ties == 0) return;
      const double u = streams_.uniform(StreamTag::TieBreak, 0, t);
      auto pick = std::min<std::size_t>(static_cast<std::size_t>(u * static_cast<double>(ties)),
                                        ties - 1);
      for (std::size_t i = 0; i < n; ++i) {
        if (!slot_[i].connected || slot_[i].queue != longest) continue;
        if (pick-- == 0) {
          slot_[i].scheduled = slot_[i].transmit = true;
          return;
        }
      }
      return;
    }

    for (std::size_t i = 0; i < n; ++i) {
      auto& s = slot_[i];
      const bool coin = streams_.uniform(StreamTag::TransmitCoin, node_id(i), t) < nodes_[i].p;
      const bool has_packet = s.queue > 0;
      switch (cfg_.policy.kind) {
        case PolicyKind::Cara:
          s.transmit = s.estimated_good && has_packet && coin;
          break;
        case PolicyKind::CaraDominant:
          s.transmit = s.estimated_good && (has_packet || sends_dummies(i)) && coin;
          s.dummy = s.transmit && !has_packet;
          break;
        case PolicyKind::Aloha:
          s.transmit = has_packet && coin;
          break;
        case PolicyKind::Lcq:
          break;
      }
    }
  }

  void resolve_receptions(std::uint64_t t) {
    const std::size_t n = nodes_.size();
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = slot_[i];
      if (!s.transmit || !s.channel_good) continue;
      double q = nodes_[i].q_solo;
      if (cfg_.policy.kind != PolicyKind::Lcq) {
        const auto& other = slot_[1 - i];
        if (other.transmit) q = other.channel_good ? nodes_[i].q_with_good : nodes_[i].q_with_bad;
      }
      s.success = streams_.uniform(StreamTag::Reception, node_id(i), t) < q;
    }
  }

  double least_squares_slope(const Accum& a, std::uint64_t window) const {
    if (window < 2) return 0.0;
    const long double n = static_cast<long double>(window);
    const long double mean_t = (n - 1.0L) / 2.0L;
    const long double sxx = n * (n * n - 1.0L) / 12.0L;
    const long double sxy = a.sum_tq - mean_t * static_cast<long double>(a.sum_q);
    return static_cast<double>(sxy / sxx);
  }

  double batch_stderr(const Accum& a) const {
    std::vector<double> ratios;
    for (std::size_t b = 0; b < cfg_.batches; ++b)
      if (a.batches[b].eligible > 0)
        ratios.push_back(static_cast<double>(a.batches[b].successes) /
                         static_cast<double>(a.batches[b].eligible));
    if (ratios.size() < 2) return 0.0;
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    double var = 0.0;
    for (double r : ratios) var += (r - mean) * (r - mean);
    var /= static_cast<double>(ratios.size() - 1);
    return std::sqrt(var / static_cast<double>(ratios.size()));
  }

  SimConfig cfg_;
  StreamSource streams_;
  std::vector<NodeModel> nodes_;
  std::vector<std::uint64_t> queue_;
  std::vector<bool> good_;
  std::vector<NodeSlot> slot_;
  std::vector<Accum> acc_;
  std::uint64_t now_ = 0;
  std::uint64_t warmup_ = 0;
  std::uint64_t window_ = 0;
  std::uint64_t batch_len_ = 1;
  bool cap_hit_ = false;
};

/// Runs the configured horizon (or until a queue exceeds the cap). When trace
/// is given, up to config.trace_slots leading slots are recorded into it.
inline SimStats run(const SimConfig& config, SlotTrace* trace = nullptr) {
  Simulator sim(config);
  while (!sim.done()) {
    sim.step();
    if (trace && trace->size() < config.trace_slots) {
      const auto rec = sim.last_slot();
      trace->push_back({sim.slot() - 1, {rec.begin(), rec.end()}});
    }
  }
  return sim.stats();
}

// ---------------------------------------------------------------------------
// Coupled dominance check

struct DominanceViolation {
  std::uint64_t slot = 0;
  int node = 0;  ///< 1-based
  std::uint64_t dominant_queue = 0;
  std::uint64_t original_queue = 0;
};

struct DominanceReport {
  bool holds = true;       ///< Q_dominant >= Q_original at every node and slot
  bool identical = true;   ///< the two queue trajectories never differed
  std::uint64_t slots = 0;
  std::uint64_t violations = 0;
  std::optional<DominanceViolation> first_violation;
};

struct CouplingOptions {
  /// Negative control: allow different seeds, which breaks the coupling.
  bool allow_seed_mismatch = false;
};

/// Runs the original system and its dominant counterpart in lockstep on
/// shared random streams and compares queue lengths after every slot.
inline DominanceReport run_coupled_dominance(const SimConfig& original, const SimConfig& dominant,
                                             CouplingOptions opts = {}) {
  auto fail = [](const std::string& m) { throw InvalidSimConfig("coupled run: " + m); };
  if (original.policy.kind != PolicyKind::Cara) fail("first config must use the cara policy");
  if (dominant.policy.kind != PolicyKind::CaraDominant)
    fail("second config must use the cara_dominant policy");
  if (!std::holds_alternative<SystemParams>(original.params) ||
      !std::holds_alternative<SystemParams>(dominant.params) ||
      !(std::get<SystemParams>(original.params) == std::get<SystemParams>(dominant.params)))
    fail("system parameters differ");
  if (!(original.p == dominant.p) || original.rates != dominant.rates ||
      !(original.channel == dominant.channel) || original.horizon != dominant.horizon ||
      original.effective_warmup() != dominant.effective_warmup())
    fail("configs differ in more than the policy");
  if (original.seed != dominant.seed && !opts.allow_seed_mismatch) fail("seeds differ");

  Simulator a(original);
  Simulator b(dominant);
  DominanceReport rep;
  while (!a.done() && !b.done()) {
    a.step();
    b.step();
    ++rep.slots;
    const auto qa = a.queues();
    const auto qb = b.queues();
    for (std::size_t i = 0; i < qa.size(); ++i) {
      if (qa[i] != qb[i]) rep.identical = false;
      if (qb[i] < qa[i]) {
        rep.holds = false;
        ++rep.violations;
        if (!rep.first_violation)
          rep.first_violation = DominanceViolation{a.slot() - 1, static_cast<int>(i) + 1, qb[i], qa[i]};
      }
    }
  }
  return rep;
}

}  // namespace cara
