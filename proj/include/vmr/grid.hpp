#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "vmr/fit.hpp"

namespace vmr::grid {

struct GridSpec {
  std::vector<double> margins = {0.01, 0.1, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> lrs = {1e-2, 1e-3, 1e-4, 1e-5};
  // Each entry is one (lambda_1..lambda_5) assignment.
  std::vector<std::array<double, 5>> weights = {{1, 1, 1, 1, 1}};
  std::size_t max_cells = 0;  // 0: exhaustive; otherwise a seeded subsample
  std::uint64_t seed = 0;
};

struct GridCell {
  double margin = 0.0;
  double lr = 0.0;
  std::array<double, 5> weights{};
  double val_r1 = 0.0;
  double val_r5 = 0.0;
  int best_epoch = 0;
};

struct GridResult {
  std::vector<GridCell> cells;  // in sweep order
  std::size_t best = 0;
  fit::TrainConfig best_config;
};

// Cells of the sweep in a fixed order (margin-major, then lr, then weights).
std::vector<GridCell> enumerate(const GridSpec& spec);

// Trains one model per cell; selects by validation Recall@1, then Recall@5,
// then sweep order.
GridResult grid_search(const std::vector<fit::Example>& train, const std::vector<features::PairFeatures>& val,
                       const std::vector<std::string>& vocab, const fit::TrainConfig& base, const GridSpec& spec,
                       const std::function<void(const GridCell&)>& on_cell = {});

nlohmann::json to_json(const GridResult& r);

}  // namespace vmr::grid
