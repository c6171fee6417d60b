#pragma once

#include <random>

#include "cara/model.hpp"

namespace cara::test {

// Reference parameter sets: pi1 = 0.8, pi2 = 0.7 throughout, symmetric errors.
inline SystemParams figure_params(double q1_solo, double q2_solo, double q_with_bad,
                                  double q_with_good, double eps) {
  SystemParams s;
  s.node1 = {0.8, eps, eps};
  s.node2 = {0.7, eps, eps};
  s.reception = {q1_solo, q_with_bad, q_with_good, q2_solo, q_with_bad, q_with_good};
  return s;
}

// Non-convex example.
inline SystemParams fig1() { return figure_params(1.0, 0.9, 0.2, 0.1, 0.2); }
// Convex example.
inline SystemParams fig2() { return figure_params(1.0, 0.9, 0.5, 0.4, 0.1); }
// Scheduler comparison, strong multipacket reception.
inline SystemParams fig3_setting1() { return figure_params(0.9, 0.9, 0.7, 0.6, 0.1); }
// Scheduler comparison, weak multipacket reception and larger errors.
inline SystemParams fig3_setting2() { return figure_params(0.9, 0.9, 0.4, 0.3, 0.3); }

// Psi1/q1 + Psi2/q2 == 1 exactly in binary floating point.
inline SystemParams right_triangle_params() {
  SystemParams s;
  s.node1 = {1.0, 0.0, 0.0};
  s.node2 = {1.0, 0.0, 0.0};
  s.reception = {1.0, 0.75, 0.5, 1.0, 0.75, 0.5};
  return s;
}

inline SystemParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pi(0.05, 0.95), eps(0.0, 0.45), solo(0.3, 1.0),
      shrink(0.05, 0.95);
  SystemParams s;
  s.node1 = {pi(rng), eps(rng), eps(rng)};
  s.node2 = {pi(rng), eps(rng), eps(rng)};
  auto& q = s.reception;
  q.q1_solo = solo(rng);
  q.q1_with_bad = q.q1_solo * shrink(rng);
  q.q1_with_good = q.q1_with_bad * shrink(rng);
  q.q2_solo = solo(rng);
  q.q2_with_bad = q.q2_solo * shrink(rng);
  q.q2_with_good = q.q2_with_bad * shrink(rng);
  return s;
}

}  // namespace cara::test
