#include "sprayer/model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace sprayer {

void PhysicalParams::validate() const
{
  const std::array<std::pair<const char*, double>, 15> fields{{
      {"m1", m1}, {"m2", m2}, {"I1", I1}, {"I2", I2}, {"L1", L1},
      {"L2", L2}, {"k1", k1}, {"k2", k2}, {"c1", c1}, {"c2", c2},
      {"B1", B1}, {"B2", B2}, {"kT", kT}, {"cT", cT}, {"g_acc", g_acc},
  }};
  for (const auto& [name, value] : fields) {
    if (!(std::isfinite(value) && value > 0.0)) {
      throw std::invalid_argument(
          fmt::format("physical parameter {} must be finite and > 0, got {}",
                      name, value));
    }
  }
}

State::Vector State::to_vector() const
{
  State::Vector v;
  v << y1, phi1, phi2, y1_dot, phi1_dot, phi2_dot;
  return v;
}

State State::from_vector(const Vector& v)
{
  return State{v[0], v[1], v[2], v[3], v[4], v[5]};
}

bool State::is_finite() const
{
  return std::isfinite(y1) && std::isfinite(phi1) && std::isfinite(phi2) &&
         std::isfinite(y1_dot) && std::isfinite(phi1_dot) &&
         std::isfinite(phi2_dot);
}

SingularMassMatrix::SingularMassMatrix(double rcond, const State& s)
    : std::runtime_error(fmt::format(
          "singular mass matrix (rcond = {:.3e}) at y1 = {}, phi1 = {}, "
          "phi2 = {}",
          rcond, s.y1, s.phi1, s.phi2)),
      rcond_(rcond),
      state_(s)
{
}

SystemMatrices assemble_matrices(const PhysicalParams& p, const State& s)
{
  const double s1 = std::sin(s.phi1);
  const double c1 = std::cos(s.phi1);
  const double s2 = std::sin(s.phi2);
  const double c2 = std::cos(s.phi2);
  const double c21 = std::cos(s.phi2 - s.phi1);
  const double s21 = std::sin(s.phi2 - s.phi1);

  const double m2L1 = p.m2 * p.L1;
  const double m2L2 = p.m2 * p.L2;
  const double m2L1L2 = p.m2 * p.L1 * p.L2;

  SystemMatrices out;
  out.M << p.m1 + p.m2, -m2L1 * s1, -m2L2 * s2,
           -m2L1 * s1, p.I1 + p.m2 * p.L1 * p.L1, m2L1L2 * c21,
           -m2L2 * s2, m2L1L2 * c21, p.I2 + p.m2 * p.L2 * p.L2;

  out.N << 0.0, -m2L1 * c1, -m2L2 * c2,
           0.0, 0.0, -m2L1L2 * s21,
           0.0, m2L1L2 * s21, 0.0;

  const double cB = (p.c2 * p.B2 - p.c1 * p.B1) * c1;
  const double cBB = (p.c1 * p.B1 * p.B1 + p.c2 * p.B2 * p.B2) * c1 * c1;
  out.C << p.c1 + p.c2, cB, 0.0,
           cB, p.cT + cBB, -p.cT,
           0.0, -p.cT, p.cT;

  out.K << p.k1 + p.k2, 0.0, 0.0,
           (p.k2 * p.B2 - p.k1 * p.B1) * c1, p.kT, -p.kT,
           0.0, -p.kT, p.kT;
  return out;
}

ForcingVectors assemble_forcing(const PhysicalParams& p, const State& s,
                                const ExcitationSample& e)
{
  const double s1 = std::sin(s.phi1);
  const double c1 = std::cos(s.phi1);
  const double s2 = std::sin(s.phi2);
  const double g = p.g_acc;

  ForcingVectors f;
  f.g_vec << (p.k2 * p.B2 - p.k1 * p.B1) * s1 + (p.m1 + p.m2) * g,
             (p.k1 * p.B1 * p.B1 + p.k2 * p.B2 * p.B2) * s1 * c1 -
                 p.m2 * g * p.L1 * s1,
             -p.m2 * g * p.L2 * s2;

  f.h_vec << p.k1 * e.ye1 + p.k2 * e.ye2 + p.c1 * e.ye1_dot +
                 p.c2 * e.ye2_dot,
             c1 * (-p.k1 * p.B1 * e.ye1 + p.k2 * p.B2 * e.ye2 -
                   p.c1 * p.B1 * e.ye1_dot + p.c2 * p.B2 * e.ye2_dot),
             0.0;
  return f;
}

Eigen::Vector3d accelerations(const PhysicalParams& p, const State& s,
                              const ExcitationSample& e)
{
  const SystemMatrices m = assemble_matrices(p, s);
  const ForcingVectors f = assemble_forcing(p, s, e);

  const Eigen::Vector3d q(s.y1, s.phi1, s.phi2);
  const Eigen::Vector3d v(s.y1_dot, s.phi1_dot, s.phi2_dot);
  const Eigen::Vector3d rhs_force =
      f.h_vec - f.g_vec - m.N * v.cwiseAbs2() - m.C * v - m.K * q;

  const Eigen::PartialPivLU<Eigen::Matrix3d> lu(m.M);
  const double rc = lu.rcond();
  if (!(rc >= kMassMatrixMinRcond)) {
    throw SingularMassMatrix(rc, s);
  }
  return lu.solve(rhs_force);
}

State::Vector rhs(const PhysicalParams& p, const State& s,
                  const ExcitationSample& e)
{
  const Eigen::Vector3d a = accelerations(p, s, e);
  State::Vector out;
  out << s.y1_dot, s.phi1_dot, s.phi2_dot, a[0], a[1], a[2];
  return out;
}

State static_equilibrium(const PhysicalParams& p)
{
  State s;
  s.y1 = -(p.m1 + p.m2) * p.g_acc / (p.k1 + p.k2);
  return s;
}

State loaded_equilibrium(const PhysicalParams& p, double ye1, double ye2)
{
  const ExcitationSample e{ye1, ye2, 0.0, 0.0, 0.0};
  State s = static_equilibrium(p);
  s.y1 += (p.k1 * ye1 + p.k2 * ye2) / (p.k1 + p.k2);

  // Static balance K q + g_vec(q) = h_vec(q): Newton on the positions with
  // a central-difference Jacobian of the accelerations.
  auto residual = [&](const Eigen::Vector3d& q) {
    State t;
    t.y1 = q[0];
    t.phi1 = q[1];
    t.phi2 = q[2];
    return accelerations(p, t, e);
  };
  Eigen::Vector3d q(s.y1, s.phi1, s.phi2);
  for (int iter = 0; iter < 50; ++iter) {
    const Eigen::Vector3d r = residual(q);
    if (r.norm() < 1e-13) {
      break;
    }
    Eigen::Matrix3d jac;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d qp = q, qm = q;
      const double h = 1e-6 * std::max(1.0, std::abs(q[j]));
      qp[j] += h;
      qm[j] -= h;
      jac.col(j) = (residual(qp) - residual(qm)) / (2.0 * h);
    }
    q -= jac.partialPivLu().solve(r);
  }
  s.y1 = q[0];
  s.phi1 = q[1];
  s.phi2 = q[2];
  return s;
}

TowerPosition tower_kinematics(const PhysicalParams& p, const State& s)
{
  return {-p.L1 * std::sin(s.phi1) - p.L2 * std::sin(s.phi2),
          s.y1 + p.L1 * std::cos(s.phi1) + p.L2 * std::cos(s.phi2)};
}

TowerPosition tower_velocity(const PhysicalParams& p, const State& s)
{
  return {-p.L1 * std::cos(s.phi1) * s.phi1_dot -
              p.L2 * std::cos(s.phi2) * s.phi2_dot,
          s.y1_dot - p.L1 * std::sin(s.phi1) * s.phi1_dot -
              p.L2 * std::sin(s.phi2) * s.phi2_dot};
}

Energy mechanical_energy(const PhysicalParams& p, const State& s,
                         const ExcitationSample& e)
{
  const TowerPosition pos = tower_kinematics(p, s);
  const TowerPosition vel = tower_velocity(p, s);

  Energy en;
  en.kinetic = 0.5 * p.m1 * s.y1_dot * s.y1_dot +
               0.5 * p.m2 * (vel.x2 * vel.x2 + vel.y2 * vel.y2) +
               0.5 * p.I1 * s.phi1_dot * s.phi1_dot +
               0.5 * p.I2 * s.phi2_dot * s.phi2_dot;

  const double d1 = s.y1 - p.B1 * std::sin(s.phi1) - e.ye1;
  const double d2 = s.y1 + p.B2 * std::sin(s.phi1) - e.ye2;
  const double dT = s.phi2 - s.phi1;
  en.potential = p.m1 * p.g_acc * s.y1 + p.m2 * p.g_acc * pos.y2 +
                 0.5 * p.k1 * d1 * d1 + 0.5 * p.k2 * d2 * d2 +
                 0.5 * p.kT * dT * dT;
  return en;
}

}  // namespace sprayer
