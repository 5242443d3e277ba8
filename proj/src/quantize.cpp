#include "vmr/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "vmr/error.hpp"

namespace vmr::quantize {

int discretize(std::optional<double> value, const BinSpec& spec) {
  if (spec.bins <= 0) throw ValidationError("bin count must be positive");
  if (!value) return spec.bins;
  if (std::isnan(*value)) throw ContractError("discretize: NaN statistic");
  if (!(spec.hi > spec.lo)) return 0;
  const double pos = (*value - spec.lo) / (spec.hi - spec.lo) * spec.bins;
  return static_cast<int>(std::clamp(std::floor(pos), 0.0, static_cast<double>(spec.bins - 1)));
}

int count_bucket(int n, int cap) {
  if (cap <= 0) throw ValidationError("count cap must be positive");
  if (n < 0) throw ContractError("beat count is negative");
  return std::min(n, cap);
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ContractError("percentile of an empty set");
  if (!(pct >= 0.0 && pct <= 100.0)) throw ValidationError("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, values.size() - 1);
  const double w = pos - static_cast<double>(i);
  return values[i] + w * (values[j] - values[i]);
}

namespace {

BinSpec fit_bins(const std::vector<double>& values, const QuantConfig& cfg) {
  BinSpec b{0.0, 1.0, cfg.bins};
  if (values.empty()) return b;
  b.lo = percentile(values, cfg.low_pct);
  b.hi = percentile(values, cfg.high_pct);
  return b;
}

nlohmann::json bins_json(const BinSpec& b) { return {{"lo", b.lo}, {"hi", b.hi}, {"bins", b.bins}}; }

BinSpec bins_from(const nlohmann::json& j) {
  BinSpec b;
  b.lo = j.at("lo").get<double>();
  b.hi = j.at("hi").get<double>();
  b.bins = j.at("bins").get<int>();
  if (b.bins <= 0) throw ValidationError("calibration: bin count must be positive");
  return b;
}

Tensor uniform_table(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.05, 0.05);
  return nn::parameter(std::move(m));
}

}  // namespace

Calibration calibrate(std::span<const signal::RhythmStats> rhythm, std::span<const signal::FlowStat> flow,
                      const QuantConfig& cfg) {
  if (cfg.bins <= 0 || cfg.count_cap <= 0) throw ValidationError("quantize: bins and count cap must be positive");
  if (!(cfg.low_pct >= 0.0 && cfg.low_pct < cfg.high_pct && cfg.high_pct <= 100.0)) {
    throw ValidationError("quantize: need 0 <= low_pct < high_pct <= 100");
  }
  std::vector<double> s, l, m;
  for (const auto& r : rhythm) {
    if (r.n_beat > 0) s.push_back(r.s_beat);
    if (r.l_bar) l.push_back(*r.l_bar);
  }
  for (const auto& f : flow) m.push_back(f.m_bar);
  return Calibration{cfg.count_cap, fit_bins(s, cfg), fit_bins(l, cfg), fit_bins(m, cfg)};
}

nlohmann::json to_json(const Calibration& c) {
  return {{"count_cap", c.count_cap},
          {"strength", bins_json(c.strength)},
          {"interval", bins_json(c.interval)},
          {"magnitude", bins_json(c.magnitude)}};
}

Calibration calibration_from_json(const nlohmann::json& j) {
  Calibration c;
  c.count_cap = j.at("count_cap").get<int>();
  if (c.count_cap <= 0) throw ValidationError("calibration: count cap must be positive");
  c.strength = bins_from(j.at("strength"));
  c.interval = bins_from(j.at("interval"));
  c.magnitude = bins_from(j.at("magnitude"));
  return c;
}

RhythmCode encode_rhythm(const signal::RhythmStats& r, const Calibration& c) {
  RhythmCode code;
  code.n = count_bucket(r.n_beat, c.count_cap);
  code.s = discretize(r.n_beat > 0 ? std::optional<double>(r.s_beat) : std::nullopt, c.strength);
  code.l = discretize(r.l_bar, c.interval);
  return code;
}

int encode_flow(const signal::FlowStat& f, const Calibration& c) { return discretize(f.m_bar, c.magnitude); }

PlugInTables::PlugInTables(const Calibration& c, Rng& rng)
    : count_(uniform_table(c.count_cap + 1, kCountDim, rng)),
      strength_(uniform_table(c.strength.bins + 1, kStrengthDim, rng)),
      interval_(uniform_table(c.interval.bins + 1, kIntervalDim, rng)),
      flow_(uniform_table(c.magnitude.bins + 1, kFlowDim, rng)) {}

Tensor PlugInTables::rhythm(std::span<const RhythmCode> codes) const {
  std::vector<Index> n, s, l;
  for (const auto& c : codes) {
    if (c.n < 0 || c.n >= count_.rows() || c.s < 0 || c.s >= strength_.rows() || c.l < 0 || c.l >= interval_.rows()) {
      throw ContractError("rhythm code outside its table");
    }
    n.push_back(c.n);
    s.push_back(c.s);
    l.push_back(c.l);
  }
  return nn::concat_cols({nn::gather_rows(count_, n), nn::gather_rows(strength_, s), nn::gather_rows(interval_, l)});
}

Tensor PlugInTables::flow(std::span<const int> codes) const {
  std::vector<Index> rows;
  for (int c : codes) {
    if (c < 0 || c >= flow_.rows()) throw ContractError("flow code outside its table");
    rows.push_back(c);
  }
  return nn::gather_rows(flow_, rows);
}

nn::ParamList PlugInTables::params() const {
  return {{"plugin.count", count_}, {"plugin.strength", strength_}, {"plugin.interval", interval_}, {"plugin.flow", flow_}};
}

}  // namespace vmr::quantize
