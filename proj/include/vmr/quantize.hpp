#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmr/nn/layers.hpp"
#include "vmr/signal.hpp"

namespace vmr::quantize {

using nn::Index;
using nn::Matrix;
using nn::Tensor;

// Uniform bins over [lo, hi]; values outside are clamped to the edge bins.
// Undefined values map to the reserved index `bins`.
struct BinSpec {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 32;

  bool operator==(const BinSpec&) const = default;
};

int discretize(std::optional<double> value, const BinSpec& spec);
// Count bucket: min(n, cap); always defined.
int count_bucket(int n, int cap);

// Linear-interpolation percentile (0..100) of the values.
double percentile(std::vector<double> values, double pct);

struct QuantConfig {
  int count_cap = 32;
  int bins = 32;
  double low_pct = 1.0;
  double high_pct = 99.0;
};

struct Calibration {
  int count_cap = 32;
  BinSpec strength;   // s_beat
  BinSpec interval;   // l_bar
  BinSpec magnitude;  // m_bar

  bool operator==(const Calibration&) const = default;
};

// Ranges come from the training clips only.
Calibration calibrate(std::span<const signal::RhythmStats> rhythm, std::span<const signal::FlowStat> flow,
                      const QuantConfig& cfg);

nlohmann::json to_json(const Calibration& c);
Calibration calibration_from_json(const nlohmann::json& j);

struct RhythmCode {
  int n = 0;
  int s = 0;
  int l = 0;
  bool operator==(const RhythmCode&) const = default;
};

RhythmCode encode_rhythm(const signal::RhythmStats& r, const Calibration& c);
int encode_flow(const signal::FlowStat& f, const Calibration& c);

inline constexpr Index kCountDim = 256;
inline constexpr Index kStrengthDim = 128;
inline constexpr Index kIntervalDim = 128;
inline constexpr Index kFlowDim = 512;

// Trainable lookup tables for the quantized statistics, U(-0.05, 0.05) at
// initialisation. The rhythm vector is [count | strength | interval].
class PlugInTables {
 public:
  PlugInTables() = default;
  PlugInTables(const Calibration& c, Rng& rng);

  // rows: one code per clip; returns N x 512.
  Tensor rhythm(std::span<const RhythmCode> codes) const;
  Tensor flow(std::span<const int> codes) const;

  nn::ParamList params() const;

 private:
  Tensor count_;
  Tensor strength_;
  Tensor interval_;
  Tensor flow_;
};

}  // namespace vmr::quantize
