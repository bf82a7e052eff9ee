#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sprayer {

/// Mechanical constants of the trailer/tower system (SI units).
///
/// Defaults are the nominal values of the Arbus Multisprayer 4000.
struct PhysicalParams
{
  double m1 = 6500.0;   ///< trailer mass (kg)
  double m2 = 800.0;    ///< tower mass (kg)
  double I1 = 6850.0;   ///< trailer inertia (kg m^2)
  double I2 = 6250.0;   ///< tower inertia (kg m^2)
  double L1 = 0.2;      ///< trailer CG to articulation (m)
  double L2 = 2.4;      ///< tower arm length (m)
  double k1 = 465.0e3;  ///< left tire stiffness (N/m)
  double k2 = 465.0e3;  ///< right tire stiffness (N/m)
  double c1 = 5.6e3;    ///< left tire damping (N s/m)
  double c2 = 5.6e3;    ///< right tire damping (N s/m)
  double B1 = 0.85;     ///< left half-track (m)
  double B2 = 0.85;     ///< right half-track (m)
  double kT = 100.0e3;  ///< articulation torsional stiffness (N m/rad)
  double cT = 40.0e3;   ///< articulation torsional damping (N m s/rad)
  double g_acc = 9.81;  ///< gravitational acceleration (m/s^2)

  /// Throws std::invalid_argument naming the first non-positive field.
  void validate() const;
};

/// Generalized state (y1, phi1, phi2, y1_dot, phi1_dot, phi2_dot).
struct State
{
  double y1 = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
  double y1_dot = 0.0;
  double phi1_dot = 0.0;
  double phi2_dot = 0.0;

  using Vector = Eigen::Matrix<double, 6, 1>;

  Vector to_vector() const;
  static State from_vector(const Vector& v);
  bool is_finite() const;
};

/// Tire vertical displacements and their rates at time t.
struct ExcitationSample
{
  double ye1 = 0.0;
  double ye2 = 0.0;
  double ye1_dot = 0.0;
  double ye2_dot = 0.0;
  double t = 0.0;
};

struct SystemMatrices
{
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d N = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d K = Eigen::Matrix3d::Zero();
  Eigen::Vector3d g_vec = Eigen::Vector3d::Zero();
  Eigen::Vector3d h_vec = Eigen::Vector3d::Zero();
};

struct ForcingVectors
{
  Eigen::Vector3d g_vec = Eigen::Vector3d::Zero();
  Eigen::Vector3d h_vec = Eigen::Vector3d::Zero();
};

class SingularMassMatrix : public std::runtime_error
{
public:
  SingularMassMatrix(double rcond, const State& s);

  double rcond() const noexcept { return rcond_; }
  const State& state() const noexcept { return state_; }

private:
  double rcond_;
  State state_;
};

/// Reciprocal condition number below which the mass matrix is rejected.
inline constexpr double kMassMatrixMinRcond = 1e-12;

/// Configuration-dependent inertia (M), velocity-squared (N), damping (C)
/// and stiffness (K) matrices. g_vec/h_vec are left zero; see assemble_forcing.
///
/// The inertia and centripetal couplings follow from the kinetic energy of
/// the tower centre x2 = -L1 sin(phi1) - L2 sin(phi2),
/// y2 = y1 + L1 cos(phi1) + L2 cos(phi2):
///   M13 = M31 = -m2 L2 sin(phi2),  N23 = -N32 = -m2 L1 L2 sin(phi2 - phi1).
/// K is not symmetric: K12 = 0 while K21 = (k2 B2 - k1 B1) cos(phi1); the
/// missing row-1 coupling is carried nonlinearly by g_vec(0).
SystemMatrices assemble_matrices(const PhysicalParams& p, const State& s);

/// Gravity/suspension vector g_vec and road forcing vector h_vec.
///
/// g_vec = ((k2 B2 - k1 B1) sin phi1 + (m1+m2) g,
///          (k1 B1^2 + k2 B2^2) sin phi1 cos phi1 - m2 g L1 sin phi1,
///          -m2 g L2 sin phi2)
/// h_vec = (k1 ye1 + k2 ye2 + c1 ye1' + c2 ye2',
///          cos phi1 (-k1 B1 ye1 + k2 B2 ye2 - c1 B1 ye1' + c2 B2 ye2'),
///          0)
/// with g = +g_acc. Both enter the equations of motion as
///   M a + N v^2 + C v + K q = h_vec - g_vec.
ForcingVectors assemble_forcing(const PhysicalParams& p, const State& s,
                                const ExcitationSample& e);

/// Generalized accelerations (y1'', phi1'', phi2'').
/// Throws SingularMassMatrix when rcond(M) < kMassMatrixMinRcond.
Eigen::Vector3d accelerations(const PhysicalParams& p, const State& s,
                              const ExcitationSample& e);

/// First-order right-hand side: (velocities, accelerations).
State::Vector rhs(const PhysicalParams& p, const State& s,
                  const ExcitationSample& e);

/// Resting configuration under gravity with level tires:
/// y1 = -(m1+m2) g / (k1+k2), everything else zero. It is an exact fixed
/// point of rhs with zero excitation whenever k1 B1 == k2 B2.
State static_equilibrium(const PhysicalParams& p);

/// Resting configuration with the tires held at constant heights (ye1, ye2),
/// found by Newton iteration from the level-tire state. For a symmetric
/// vehicle y1 = (k1 ye1 + k2 ye2 - (m1+m2) g) / (k1+k2).
State loaded_equilibrium(const PhysicalParams& p, double ye1, double ye2);

struct TowerPosition
{
  double x2 = 0.0;
  double y2 = 0.0;
};

TowerPosition tower_kinematics(const PhysicalParams& p, const State& s);

/// Time derivatives of (x2, y2).
TowerPosition tower_velocity(const PhysicalParams& p, const State& s);

struct Energy
{
  double kinetic = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + potential; }
};

/// Kinetic plus potential energy (gravity, tire springs, articulation).
Energy mechanical_energy(const PhysicalParams& p, const State& s,
                         const ExcitationSample& e = {});

}  // namespace sprayer
