#pragma once

#include "tfc/network.hpp"

#include <memory>
#include <vector>

namespace tfc {

/// Kinds of per-bus injection components supported by scenario files.
enum class SignalKind { Constant, SineDisturbance, Piecewise };

/// One bus's injection as a function of time. All kinds settle to a
/// constant after a finite settling time.
struct BusSignal {
  SignalKind kind = SignalKind::Constant;
  double base = 0.0;  // p_i(0) for Constant and SineDisturbance

  // SineDisturbance: p(t) = (1 + delta(t)) * base with
  // delta(t) = amplitude * sin(pi/(t_off - t_on) * (t - t_on)) on (t_on, t_off),
  // zero outside.
  double amplitude = 0.0;
  double t_on = 0.0;
  double t_off = 0.0;

  // Piecewise: breakpoints with closed-left convention; value holds from
  // times[j] up to (but excluding) times[j+1]; before times[0] the first
  // value applies, after the last breakpoint the last value holds forever.
  std::vector<double> times;
  std::vector<double> values;

  double value(double t) const;
  double settling_time() const;
};

/// Time-varying power injection for the whole network; piecewise continuous
/// per bus and constant after the settling time t_bar.
class InjectionSignal {
 public:
  InjectionSignal() = default;
  explicit InjectionSignal(std::vector<BusSignal> per_bus);

  int size() const { return static_cast<int>(per_bus_.size()); }
  Vec value(double t) const;
  double settling_time() const { return t_bar_; }  // t_bar
  const Vec& settled_value() const { return p_star_; }
  const BusSignal& bus_signal(int i) const { return per_bus_[i]; }

  static InjectionSignal constant(const Vec& p);

 private:
  std::vector<BusSignal> per_bus_;
  double t_bar_ = 0.0;
  Vec p_star_;
};

/// Discrete forecast anchored at time t: column k predicts the injection
/// at t + k*T, for k = 0..N-1.
struct Forecast {
  double anchor = 0.0;
  double T = 0.0;
  Mat columns;  // n x N
};

/// Forecast that measures p(t) and holds it constant over the horizon.
Forecast constant_hold_forecast(const InjectionSignal& signal, double t, int N, double T);

/// Forecast that samples the true signal at t + k*T (exact foresight).
Forecast oracle_forecast(const InjectionSignal& signal, double t, int N, double T);

/// The bundled IEEE-39 disturbance: buses 1..29 (entries 0..28) get
/// p_i(t) = (1 + delta(t)) p_i(0) with delta = 0.3 sin(pi/15 (t - 0.5)) on
/// (0.5, 15.5) and zero outside; remaining entries stay at p0.
Vec ieee39_disturbance(const Vec& p0, double t);

}  // namespace tfc
