#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cara/analysis.hpp"
#include "cara/model.hpp"
#include "cara/sim.hpp"

// Batch front-end: experiment configuration (JSON), the task runners and the
// CSV / JSON table writers used by the cara_cli tool.
//
// Config layout:
//   {
//     "system": { "node1": {"pi_good","eps_good","eps_bad"}, "node2": {...},
//                 "reception": {"q1_solo","q1_with_bad","q1_with_good",
//                               "q2_solo","q2_with_bad","q2_with_good"},
//                 "allow_degenerate": false,
//                 "lcq_nodes": [{"pi_good","eps_good","q_solo"}, ...] },   // optional
//     "task": "region" | "aloha_region" | "lcq_region" | "simulate" | "sweep"
//             | "compare" | "dominance_check",
//     "grid": { "lambda1": {"start","stop","step"}, "lambda2": {...} },
//     "sim": { "horizon", "warmup" (optional), "seeds": [..], "policy",
//              "dominant_node", "p": [p1,p2], "rates": [..],
//              "channel": {"mode": "iid" | "markov", "persistence": [..]},
//              "queue_cap", "decouple_seeds", "membership": "fixed_p" | "closure",
//              "slope_tol", "empty_min" },
//     "output": { "path", "format": "csv" | "json", "boundary_samples", "band" },
//     "workers": 1
//   }

namespace cara::cli {

using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Task { Region, AlohaRegion, LcqRegion, Simulate, Sweep, Compare, DominanceCheck };
enum class OutputFormat { Csv, Json };
enum class Membership { FixedP, Closure };

namespace detail {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline constexpr EnumName<Task> kTaskNames[] = {
    {Task::Region, "region"},           {Task::AlohaRegion, "aloha_region"},
    {Task::LcqRegion, "lcq_region"},    {Task::Simulate, "simulate"},
    {Task::Sweep, "sweep"},             {Task::Compare, "compare"},
    {Task::DominanceCheck, "dominance_check"},
};
inline constexpr EnumName<OutputFormat> kFormatNames[] = {{OutputFormat::Csv, "csv"},
                                                          {OutputFormat::Json, "json"}};
inline constexpr EnumName<Membership> kMembershipNames[] = {{Membership::FixedP, "fixed_p"},
                                                            {Membership::Closure, "closure"}};
inline constexpr EnumName<PolicyKind> kPolicyNames[] = {{PolicyKind::Cara, "cara"},
                                                        {PolicyKind::CaraDominant, "cara_dominant"},
                                                        {PolicyKind::Aloha, "aloha"},
                                                        {PolicyKind::Lcq, "lcq"}};
inline constexpr EnumName<ChannelMode> kChannelNames[] = {
    {ChannelMode::IidStationary, "iid"}, {ChannelMode::TwoStateMarkov, "markov"}};

template <class E, std::size_t N>
E parse_enum(const EnumName<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& e : table)
    if (s == e.name) return e.value;
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected one of: " + allowed + ")");
}

template <class E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline double require_number(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace detail

inline Task parse_task(const std::string& s) { return detail::parse_enum(detail::kTaskNames, s, "task"); }
inline const char* to_string(Task t) { return detail::enum_name(detail::kTaskNames, t); }
inline OutputFormat parse_format(const std::string& s) {
  return detail::parse_enum(detail::kFormatNames, s, "format");
}
inline const char* to_string(OutputFormat f) { return detail::enum_name(detail::kFormatNames, f); }

/// Inclusive arithmetic progression start, start+step, ... <= stop.
struct Range {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;

  std::vector<double> points() const {
    std::vector<double> out;
    if (!(step > 0.0) || stop < start) return out;
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t k = 0; k < n; ++k) out.push_back(start + step * static_cast<double>(k));
    return out;
  }
  bool operator==(const Range&) const = default;
};

struct GridSpec {
  Range lambda1;
  Range lambda2;

  std::vector<ArrivalRates> points() const {
    std::vector<ArrivalRates> out;
    for (double l1 : lambda1.points())
      for (double l2 : lambda2.points()) out.push_back({l1, l2});
    return out;
  }
  bool operator==(const GridSpec&) const = default;
};

struct SimSettings {
  std::uint64_t horizon = 1'000'000;
  std::optional<std::uint64_t> warmup;
  std::vector<std::uint64_t> seeds{1};
  Policy policy;
  TransmitProbs p{0.5, 0.5};
  std::vector<double> rates;
  ChannelProcessSpec channel;
  std::uint64_t queue_cap = 1'000'000;
  bool decouple_seeds = false;
  Membership membership = Membership::FixedP;
  VerdictThresholds thresholds;

  bool operator==(const SimSettings& o) const {
    return horizon == o.horizon && warmup == o.warmup && seeds == o.seeds && policy == o.policy &&
           p == o.p && rates == o.rates && channel == o.channel && queue_cap == o.queue_cap &&
           decouple_seeds == o.decouple_seeds && membership == o.membership &&
           thresholds.slope_tol == o.thresholds.slope_tol &&
           thresholds.empty_min == o.thresholds.empty_min;
  }
};

struct OutputSpec {
  std::string path;  ///< empty: write the table to standard output
  OutputFormat format = OutputFormat::Csv;
  std::size_t boundary_samples = 512;
  double band = 0.02;
  bool operator==(const OutputSpec&) const = default;
};

struct ExperimentConfig {
  SystemParams system;
  bool allow_degenerate = false;
  std::optional<LcqSystemParams> lcq;
  Task task = Task::Region;
  std::optional<GridSpec> grid;
  SimSettings sim;
  OutputSpec output;
  unsigned workers = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// JSON (de)serialization

inline json to_json(const ExperimentConfig& c) {
  auto node = [](const NodeChannelParams& n) {
    return json{{"pi_good", n.pi_good}, {"eps_good", n.eps_good}, {"eps_bad", n.eps_bad}};
  };
  const auto& q = c.system.reception;
  json system{{"node1", node(c.system.node1)},
              {"node2", node(c.system.node2)},
              {"reception",
               {{"q1_solo", q.q1_solo},
                {"q1_with_bad", q.q1_with_bad},
                {"q1_with_good", q.q1_with_good},
                {"q2_solo", q.q2_solo},
                {"q2_with_bad", q.q2_with_bad},
                {"q2_with_good", q.q2_with_good}}},
              {"allow_degenerate", c.allow_degenerate}};
  if (c.lcq) {
    json nodes = json::array();
    for (const auto& n : c.lcq->nodes)
      nodes.push_back({{"pi_good", n.pi_good}, {"eps_good", n.eps_good}, {"q_solo", n.q_solo}});
    system["lcq_nodes"] = nodes;
  }

  json sim{{"horizon", c.sim.horizon},
           {"seeds", c.sim.seeds},
           {"policy", detail::enum_name(detail::kPolicyNames, c.sim.policy.kind)},
           {"dominant_node", c.sim.policy.dominant_node},
           {"p", {c.sim.p.p1, c.sim.p.p2}},
           {"rates", c.sim.rates},
           {"channel",
            {{"mode", detail::enum_name(detail::kChannelNames, c.sim.channel.mode)},
             {"persistence", c.sim.channel.persistence}}},
           {"queue_cap", c.sim.queue_cap},
           {"decouple_seeds", c.sim.decouple_seeds},
           {"membership", detail::enum_name(detail::kMembershipNames, c.sim.membership)},
           {"slope_tol", c.sim.thresholds.slope_tol},
           {"empty_min", c.sim.thresholds.empty_min}};
  if (c.sim.warmup) sim["warmup"] = *c.sim.warmup;

  json out{{"system", system},
           {"task", to_string(c.task)},
           {"sim", sim},
           {"output",
            {{"path", c.output.path},
             {"format", to_string(c.output.format)},
             {"boundary_samples", c.output.boundary_samples},
             {"band", c.output.band}}},
           {"workers", c.workers}};
  if (c.grid) {
    auto range = [](const Range& r) {
      return json{{"start", r.start}, {"stop", r.stop}, {"step", r.step}};
    };
    out["grid"] = {{"lambda1", range(c.grid->lambda1)}, {"lambda2", range(c.grid->lambda2)}};
  }
  return out;
}

/// Parses and checks the structural invariants (grid steps, ranges, format).
/// Model-level validation of the system parameters happens in run_task.
inline ExperimentConfig from_json(const json& j) {
  using detail::get_or;
  using detail::require_number;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ExperimentConfig c;

  if (!j.contains("system")) throw ConfigError("missing 'system' section");
  const auto& s = j.at("system");
  auto node = [&](const char* key) {
    if (!s.contains(key)) throw ConfigError(std::string("missing 'system.") + key + "'");
    const auto& n = s.at(key);
    return NodeChannelParams{require_number(n, "pi_good"), require_number(n, "eps_good"),
                             require_number(n, "eps_bad")};
  };
  c.system.node1 = node("node1");
  c.system.node2 = node("node2");
  if (!s.contains("reception")) throw ConfigError("missing 'system.reception'");
  const auto& r = s.at("reception");
  c.system.reception = {require_number(r, "q1_solo"), require_number(r, "q1_with_bad"),
                        require_number(r, "q1_with_good"), require_number(r, "q2_solo"),
                        require_number(r, "q2_with_bad"), require_number(r, "q2_with_good")};
  c.allow_degenerate = get_or<bool>(s, "allow_degenerate", false);
  if (s.contains("lcq_nodes")) {
    LcqSystemParams lp;
    for (const auto& n : s.at("lcq_nodes"))
      lp.nodes.push_back(
          {require_number(n, "pi_good"), require_number(n, "eps_good"), require_number(n, "q_solo")});
    c.lcq = lp;
  }

  c.task = parse_task(get_or<std::string>(j, "task", "region"));
  c.workers = get_or<unsigned>(j, "workers", 1u);
  if (c.workers == 0) throw ConfigError("workers must be positive");

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    auto range = [&](const char* key) {
      if (!g.contains(key)) throw ConfigError(std::string("missing 'grid.") + key + "'");
      const auto& rj = g.at(key);
      Range rg{require_number(rj, "start"), require_number(rj, "stop"), require_number(rj, "step")};
      if (!(rg.step > 0.0)) throw ConfigError(std::string("grid.") + key + ".step must be > 0");
      if (!(rg.start >= 0.0 && rg.stop <= 1.0))
        throw ConfigError(std::string("grid.") + key + " must lie within [0,1]");
      return rg;
    };
    c.grid = GridSpec{range("lambda1"), range("lambda2")};
  }

  if (j.contains("sim")) {
    const auto& sj = j.at("sim");
    c.sim.horizon = get_or<std::uint64_t>(sj, "horizon", c.sim.horizon);
    if (sj.contains("warmup") && !sj.at("warmup").is_null())
      c.sim.warmup = sj.at("warmup").get<std::uint64_t>();
    c.sim.seeds = get_or<std::vector<std::uint64_t>>(sj, "seeds", c.sim.seeds);
    c.sim.policy.kind = detail::parse_enum(detail::kPolicyNames,
                                           get_or<std::string>(sj, "policy", "cara"), "policy");
    c.sim.policy.dominant_node = get_or<int>(sj, "dominant_node", 2);
    const auto p = get_or<std::vector<double>>(sj, "p", {c.sim.p.p1, c.sim.p.p2});
    if (p.size() != 2) throw ConfigError("sim.p must have two entries");
    c.sim.p = {p[0], p[1]};
    c.sim.rates = get_or<std::vector<double>>(sj, "rates", {});
    if (sj.contains("channel")) {
      const auto& ch = sj.at("channel");
      c.sim.channel.mode = detail::parse_enum(detail::kChannelNames,
                                              get_or<std::string>(ch, "mode", "iid"), "channel mode");
      c.sim.channel.persistence = get_or<std::vector<double>>(ch, "persistence", {});
    }
    c.sim.queue_cap = get_or<std::uint64_t>(sj, "queue_cap", c.sim.queue_cap);
    c.sim.decouple_seeds = get_or<bool>(sj, "decouple_seeds", false);
    c.sim.membership = detail::parse_enum(
        detail::kMembershipNames, get_or<std::string>(sj, "membership", "fixed_p"), "membership");
    c.sim.thresholds.slope_tol = get_or<double>(sj, "slope_tol", c.sim.thresholds.slope_tol);
    c.sim.thresholds.empty_min = get_or<double>(sj, "empty_min", c.sim.thresholds.empty_min);
  }

  if (j.contains("output")) {
    const auto& oj = j.at("output");
    c.output.path = get_or<std::string>(oj, "path", "");
    c.output.format = parse_format(get_or<std::string>(oj, "format", "csv"));
    c.output.boundary_samples = get_or<std::size_t>(oj, "boundary_samples", 512);
    c.output.band = get_or<double>(oj, "band", 0.02);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::string, double, std::int64_t, bool>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string format_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream os;
          os << std::setprecision(17) << v;
          return os.str();
        } else {
          return std::to_string(v);
        }
      },
      c);
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    os << (i ? "," : "") << csv_escape(t.columns[i]);
  os << "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(format_cell(row[i]));
    os << "\r\n";
  }
}

inline json table_to_json(const Table& t) {
  json arr = json::array();
  for (const auto& row : t.rows) {
    json rec = json::object();
    for (std::size_t i = 0; i < row.size() && i < t.columns.size(); ++i)
      std::visit([&](const auto& v) { rec[t.columns[i]] = v; }, row[i]);
    arr.push_back(std::move(rec));
  }
  return arr;
}

inline void write_table(std::ostream& os, const Table& t, OutputFormat f) {
  if (f == OutputFormat::Csv)
    write_csv(os, t);
  else
    os << table_to_json(t).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Task runners

struct TaskResult {
  Table table;
  std::string summary;
  double agreement = 0.0;          ///< compare: fraction of scored points that agree
  std::size_t scored_points = 0;   ///< compare: points outside the boundary band
  std::size_t failures = 0;        ///< dominance: seeds with violations; sim: failed points
};

/// Runs f(0..n-1) on up to `workers` threads. Results must be written to
/// preallocated slots so output order stays deterministic.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < w; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& th : pool) th.join();
}

namespace detail {

inline void append_boundary(Table& t, const std::vector<BoundaryVertex>& vs, const char* label) {
  for (const auto& v : vs)
    t.rows.push_back({std::string(to_string(v.segment)), v.point.x, v.point.y, std::string(label)});
}

inline Table boundary_table() { return Table{{"segment_tag", "lambda1", "lambda2", "region_label"}, {}}; }

inline LcqSystemParams lcq_params(const ExperimentConfig& c) {
  return c.lcq ? *c.lcq : to_lcq(c.system);
}

inline SimConfig make_sim_config(const ExperimentConfig& c, std::vector<double> rates,
                                 std::uint64_t seed) {
  SimConfig s;
  if (c.sim.policy.kind == PolicyKind::Lcq && c.lcq)
    s.params = *c.lcq;
  else
    s.params = c.system;
  s.validation.allow_degenerate = c.allow_degenerate;
  s.policy = c.sim.policy;
  s.p = c.sim.p;
  s.rates = std::move(rates);
  s.channel = c.sim.channel;
  s.horizon = c.sim.horizon;
  s.warmup = c.sim.warmup;
  s.seed = seed;
  s.queue_cap = c.sim.queue_cap;
  return s;
}

inline bool analytic_member(const ExperimentConfig& c, const ArrivalRates& r, double tol) {
  if (c.sim.policy.kind == PolicyKind::Lcq) {
    const auto lp = lcq_params(c);
    const double shifted[2] = {r.lambda1 + tol, r.lambda2 + tol};
    return lcq_region_contains(lp, std::span<const double>(shifted, 2));
  }
  if (c.sim.membership == Membership::Closure) return closure_region_contains(c.system, r, tol);
  return fixed_p_region_contains(c.system, c.sim.p, r, tol);
}

}  // namespace detail

enum class BandClass { Inside, Outside, Boundary };

inline const char* to_string(BandClass b) {
  switch (b) {
    case BandClass::Inside: return "inside";
    case BandClass::Outside: return "outside";
    case BandClass::Boundary: return "boundary";
  }
  return "?";
}

/// All regions here are down-closed, so the L-infinity ball of radius `band`
/// around r lies inside iff r + band lies inside, and outside iff r - band
/// (clamped to the quadrant) lies outside.
template <class Member>
BandClass classify_with_band(const ArrivalRates& r, double band, Member&& member) {
  if (member(ArrivalRates{r.lambda1 + band, r.lambda2 + band})) return BandClass::Inside;
  if (!member(ArrivalRates{std::max(r.lambda1 - band, 0.0), std::max(r.lambda2 - band, 0.0)}))
    return BandClass::Outside;
  return BandClass::Boundary;
}

inline TaskResult cmd_region(const ExperimentConfig& c) {
  TaskResult res;
  res.table = detail::boundary_table();
  const std::size_t n = c.output.boundary_samples;
  std::ostringstream sum;

  if (c.task == Task::Region) {
    const auto cara_eps = closure_boundary(c.system);
    const auto cara_perfect = closure_boundary(with_perfect_csi(c.system));
    detail::append_boundary(res.table, cara_eps.vertices(n), "cara_eps");
    detail::append_boundary(res.table, cara_perfect.vertices(n), "cara_perfect");
    sum << "cara_eps: shape=" << to_string(cara_eps.shape()) << " PX=(" << cara_eps.px().x
        << ",0) PY=(0," << cara_eps.py().y << ")\n";
    sum << "cara_perfect: shape=" << to_string(cara_perfect.shape()) << "\n";
  }
  if (c.task == Task::Region || c.task == Task::AlohaRegion) {
    try {
      const auto aloha = aloha_boundary(c.system);
      detail::append_boundary(res.table, aloha.vertices(n), "aloha");
      sum << "aloha: shape=" << to_string(aloha.shape()) << "\n";
    } catch (const NonPositiveAlohaGap& e) {
      if (c.task == Task::AlohaRegion) throw;
      sum << "aloha: skipped (" << e.what() << ")\n";
    }
  }
  if (c.task == Task::Region || c.task == Task::LcqRegion) {
    detail::append_boundary(res.table, lcq_boundary(detail::lcq_params(c)), "lcq");
    sum << "lcq: CARA subset of LCQ = " << (cara_subset_of_lcq(c.system) ? "true" : "false") << "\n";
  }
  sum << "rows: " << res.table.rows.size();
  res.summary = sum.str();
  return res;
}

inline void append_node_columns(std::vector<std::string>& cols, std::size_t n) {
  for (std::size_t i = 1; i <= n; ++i) {
    const auto k = std::to_string(i);
    for (const char* f : {"arrival_rate", "service_rate", "service_stderr", "departure_rate",
                          "empty_fraction", "mean_queue", "queue_slope"})
      cols.push_back(std::string(f) + "_" + k);
  }
}

inline void append_node_cells(std::vector<Cell>& row, const SimStats& s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (i < s.nodes.size()) {
      const auto& ns = s.nodes[i];
      for (double v : {ns.empirical_arrival_rate, ns.empirical_service_rate, ns.service_rate_stderr,
                       ns.departure_rate, ns.empty_fraction, ns.mean_queue, ns.queue_slope})
        row.push_back(v);
    } else {
      for (int k = 0; k < 7; ++k) row.push_back(std::string());
    }
  }
}

inline TaskResult cmd_simulate(const ExperimentConfig& c) {
  TaskResult res;
  const std::size_t n = c.sim.policy.kind == PolicyKind::Lcq && c.lcq ? c.lcq->size() : 2;
  auto& t = res.table;
  t.columns = {"seed", "policy", "verdict", "cap_hit", "error"};
  append_node_columns(t.columns, n);

  std::vector<std::optional<SimStats>> stats(c.sim.seeds.size());
  std::vector<std::string> errors(c.sim.seeds.size());
  parallel_for(c.sim.seeds.size(), c.workers, [&](std::size_t k) {
    try {
      stats[k] = run(detail::make_sim_config(c, c.sim.rates, c.sim.seeds[k]));
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });
  std::size_t stable = 0;
  for (std::size_t k = 0; k < stats.size(); ++k) {
    std::vector<Cell> row{static_cast<std::int64_t>(c.sim.seeds[k]),
                          std::string(to_string(c.sim.policy.kind))};
    if (stats[k]) {
      row.push_back(std::string(to_string(stats[k]->verdict)));
      row.push_back(stats[k]->cap_hit);
      row.push_back(std::string());
      append_node_cells(row, *stats[k], n);
      stable += stats[k]->verdict == Verdict::Stable;
    } else {
      ++res.failures;
      row.push_back(std::string("error"));
      row.push_back(false);
      row.push_back(errors[k]);
      append_node_cells(row, SimStats{}, n);
    }
    t.rows.push_back(std::move(row));
  }
  std::ostringstream sum;
  sum << "runs: " << stats.size() << ", stable: " << stable << ", failed: " << res.failures;
  res.summary = sum.str();
  return res;
}

/// Sweep (simulation only) and compare (simulation against analytic
/// membership) share the grid machinery.
inline TaskResult cmd_grid(const ExperimentConfig& c, bool compare) {
  TaskResult res;
  auto& t = res.table;
  t.columns = {"lambda1", "lambda2", "seed"};
  if (compare) {
    for (const char* col : {"analytic_fixed_p", "analytic_closure", "analytic_member", "band_class"})
      t.columns.push_back(col);
  }
  for (const char* col : {"verdict", "cap_hit"}) t.columns.push_back(col);
  if (compare) t.columns.push_back("agree");
  t.columns.push_back("error");
  append_node_columns(t.columns, 2);

  const auto points = c.grid ? c.grid->points() : std::vector<ArrivalRates>{};
  const std::size_t seeds = c.sim.seeds.size();
  const std::size_t jobs = points.size() * seeds;
  std::vector<std::optional<SimStats>> stats(jobs);
  std::vector<std::string> errors(jobs);
  parallel_for(jobs, c.workers, [&](std::size_t k) {
    const auto& r = points[k / seeds];
    try {
      stats[k] = run(detail::make_sim_config(c, {r.lambda1, r.lambda2}, c.sim.seeds[k % seeds]));
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  });

  std::size_t agree = 0;
  for (std::size_t k = 0; k < jobs; ++k) {
    const auto& r = points[k / seeds];
    std::vector<Cell> row{r.lambda1, r.lambda2, static_cast<std::int64_t>(c.sim.seeds[k % seeds])};
    BandClass band = BandClass::Boundary;
    if (compare) {
      const bool fixed = fixed_p_region_contains(c.system, c.sim.p, r);
      const bool closure = closure_region_contains(c.system, r);
      const bool member = detail::analytic_member(c, r, 0.0);
      band = classify_with_band(r, c.output.band,
                                [&](const ArrivalRates& x) { return detail::analytic_member(c, x, 0.0); });
      row.push_back(fixed);
      row.push_back(closure);
      row.push_back(member);
      row.push_back(std::string(to_string(band)));
    }
    if (stats[k]) {
      const Verdict v = stability_verdict(*stats[k], c.sim.thresholds);
      row.push_back(std::string(to_string(v)));
      row.push_back(stats[k]->cap_hit);
      if (compare) {
        const bool ok = (band == BandClass::Inside && v == Verdict::Stable) ||
                        (band == BandClass::Outside && v == Verdict::Unstable);
        if (band != BandClass::Boundary) {
          ++res.scored_points;
          agree += ok;
        }
        row.push_back(ok);
      }
      row.push_back(std::string());
      append_node_cells(row, *stats[k], 2);
    } else {
      ++res.failures;
      row.push_back(std::string("error"));
      row.push_back(false);
      if (compare) {
        row.push_back(false);
        if (band != BandClass::Boundary) ++res.scored_points;
      }
      row.push_back(errors[k]);
      append_node_cells(row, SimStats{}, 2);
    }
    t.rows.push_back(std::move(row));
  }

  std::ostringstream sum;
  sum << "grid points: " << points.size() << ", runs: " << jobs << ", failed: " << res.failures;
  if (compare) {
    res.agreement = res.scored_points ? static_cast<double>(agree) / res.scored_points : 1.0;
    sum << "\nscored (outside band " << c.output.band << "): " << res.scored_points
        << ", agreeing: " << agree << ", agreement: " << std::fixed << std::setprecision(4)
        << res.agreement;
  }
  res.summary = sum.str();
  return res;
}

inline TaskResult cmd_dominance(const ExperimentConfig& c) {
  TaskResult res;
  auto& t = res.table;
  t.columns = {"seed",         "dominant_seed",  "holds",          "identical",
               "slots",        "violations",     "first_violation_slot", "first_violation_node",
               "dominant_queue", "original_queue"};

  std::vector<DominanceReport> reports(c.sim.seeds.size());
  const auto rates = c.sim.rates.empty() ? std::vector<double>{0.0, 0.0} : c.sim.rates;
  auto dom_seed = [&](std::uint64_t s) {
    return c.sim.decouple_seeds ? s ^ 0x9E3779B97F4A7C15ull : s;
  };
  parallel_for(c.sim.seeds.size(), c.workers, [&](std::size_t k) {
    auto orig = detail::make_sim_config(c, rates, c.sim.seeds[k]);
    orig.policy = Policy::cara();
    auto dom = orig;
    dom.policy = Policy::dominant(c.sim.policy.kind == PolicyKind::CaraDominant
                                      ? c.sim.policy.dominant_node
                                      : 2);
    dom.seed = dom_seed(orig.seed);
    reports[k] = run_coupled_dominance(orig, dom, {c.sim.decouple_seeds});
  });

  std::size_t identical = 0;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    std::vector<Cell> row{static_cast<std::int64_t>(c.sim.seeds[k]),
                          static_cast<std::int64_t>(dom_seed(c.sim.seeds[k])), r.holds, r.identical,
                          static_cast<std::int64_t>(r.slots), static_cast<std::int64_t>(r.violations)};
    if (r.first_violation) {
      row.push_back(static_cast<std::int64_t>(r.first_violation->slot));
      row.push_back(static_cast<std::int64_t>(r.first_violation->node));
      row.push_back(static_cast<std::int64_t>(r.first_violation->dominant_queue));
      row.push_back(static_cast<std::int64_t>(r.first_violation->original_queue));
    } else {
      for (int i = 0; i < 4; ++i) row.push_back(std::string());
    }
    t.rows.push_back(std::move(row));
    res.failures += !r.holds;
    identical += r.identical;
  }
  std::ostringstream sum;
  sum << "seeds: " << reports.size() << ", passed: " << reports.size() - res.failures
      << ", failed: " << res.failures << ", identical trajectories: " << identical;
  for (std::size_t k = 0; k < reports.size(); ++k)
    if (reports[k].first_violation)
      sum << "\nseed " << c.sim.seeds[k] << ": first violation at slot "
          << reports[k].first_violation->slot << " node " << reports[k].first_violation->node;
  res.summary = sum.str();
  return res;
}

/// Validates the system parameters and dispatches. Throws InvalidParams or
/// ConfigError on bad input.
inline TaskResult run_task(const ExperimentConfig& c) {
  require_valid(c.system, {c.allow_degenerate});
  if (c.lcq) require_valid(*c.lcq);
  switch (c.task) {
    case Task::Region:
    case Task::AlohaRegion:
    case Task::LcqRegion:
      return cmd_region(c);
    case Task::Simulate:
      return cmd_simulate(c);
    case Task::Sweep:
      return cmd_grid(c, false);
    case Task::Compare:
      return cmd_grid(c, true);
    case Task::DominanceCheck:
      return cmd_dominance(c);
  }
  throw ConfigError("unhandled task");
}

}  // namespace cara::cli
