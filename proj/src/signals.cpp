#include "tfc/signals.hpp"

#include <cmath>
#include <stdexcept>

namespace tfc {

double BusSignal::value(double t) const {
  switch (kind) {
    case SignalKind::Constant:
      return base;
    case SignalKind::SineDisturbance: {
      if (t <= t_on || t >= t_off) return base;
      const double delta = amplitude * std::sin(M_PI / (t_off - t_on) * (t - t_on));
      return (1.0 + delta) * base;
    }
    case SignalKind::Piecewise: {
      if (times.empty()) return base;
      size_t j = 0;
      while (j + 1 < times.size() && t >= times[j + 1]) ++j;
      if (t < times[0]) return values[0];
      return values[j];
    }
  }
  return base;
}

double BusSignal::settling_time() const {
  switch (kind) {
    case SignalKind::Constant:
      return 0.0;
    case SignalKind::SineDisturbance:
      return t_off;
    case SignalKind::Piecewise:
      return times.empty() ? 0.0 : times.back();
  }
  return 0.0;
}

InjectionSignal::InjectionSignal(std::vector<BusSignal> per_bus) : per_bus_(std::move(per_bus)) {
  for (const auto& s : per_bus_) {
    if (s.kind == SignalKind::Piecewise && s.times.size() != s.values.size())
      throw std::invalid_argument("piecewise signal: times/values length mismatch");
    t_bar_ = std::max(t_bar_, s.settling_time());
  }
  p_star_ = value(t_bar_);
}

Vec InjectionSignal::value(double t) const {
  Vec p(size());
  for (int i = 0; i < size(); ++i) p[i] = per_bus_[i].value(t);
  return p;
}

InjectionSignal InjectionSignal::constant(const Vec& p) {
  std::vector<BusSignal> per(p.size());
  for (int i = 0; i < p.size(); ++i) per[i].base = p[i];
  return InjectionSignal(std::move(per));
}

namespace {

void check_forecast_args(int N, double T) {
  if (N < 1) throw std::invalid_argument("forecast: N must be >= 1");
  if (T <= 0.0) throw std::invalid_argument("forecast: T must be > 0");
}

}  // namespace

Forecast constant_hold_forecast(const InjectionSignal& signal, double t, int N, double T) {
  check_forecast_args(N, T);
  Forecast fc;
  fc.anchor = t;
  fc.T = T;
  fc.columns = signal.value(t).replicate(1, N);
  return fc;
}

Forecast oracle_forecast(const InjectionSignal& signal, double t, int N, double T) {
  check_forecast_args(N, T);
  Forecast fc;
  fc.anchor = t;
  fc.T = T;
  fc.columns.resize(signal.size(), N);
  for (int k = 0; k < N; ++k) fc.columns.col(k) = signal.value(t + k * T);
  return fc;
}

Vec ieee39_disturbance(const Vec& p0, double t) {
  Vec p = p0;
  if (t <= 0.5 || t >= 15.5) return p;
  const double delta = 0.3 * std::sin(M_PI / 15.0 * (t - 0.5));
  const int disturbed = std::min<int>(29, static_cast<int>(p0.size()));
  for (int i = 0; i < disturbed; ++i) p[i] = (1.0 + delta) * p0[i];
  return p;
}

}  // namespace tfc
