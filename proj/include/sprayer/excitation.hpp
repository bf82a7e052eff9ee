#pragma once

#include "sprayer/model.hpp"

namespace sprayer {

/// Time-dependent tire input consumed by the integrator.
class Excitation
{
public:
  virtual ~Excitation() = default;
  virtual ExcitationSample at(double t) const = 0;
};

class ZeroExcitation final : public Excitation
{
public:
  ExcitationSample at(double t) const override;
};

/// Constant tire displacement with zero rate.
class ConstantExcitation final : public Excitation
{
public:
  ConstantExcitation(double ye1, double ye2) : ye1_(ye1), ye2_(ye2) {}
  ExcitationSample at(double t) const override;

private:
  double ye1_;
  double ye2_;
};

}  // namespace sprayer
