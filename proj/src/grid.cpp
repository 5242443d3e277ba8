#include "vmr/grid.hpp"

#include <algorithm>
#include <numeric>

#include "vmr/error.hpp"

namespace vmr::grid {

std::vector<GridCell> enumerate(const GridSpec& spec) {
  if (spec.margins.empty() || spec.lrs.empty() || spec.weights.empty()) {
    throw ValidationError("grid: margins, learning rates and weights must all be non-empty");
  }
  std::vector<GridCell> cells;
  for (double m : spec.margins) {
    for (double lr : spec.lrs) {
      for (const auto& w : spec.weights) cells.push_back({m, lr, w, 0.0, 0.0, 0});
    }
  }
  if (spec.max_cells > 0 && spec.max_cells < cells.size()) {
    std::vector<std::size_t> idx(cells.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(spec.seed, "grid-budget"));
    rng.shuffle(idx);
    idx.resize(spec.max_cells);
    std::sort(idx.begin(), idx.end());
    std::vector<GridCell> kept;
    for (auto i : idx) kept.push_back(cells[i]);
    cells = std::move(kept);
  }
  return cells;
}

GridResult grid_search(const std::vector<fit::Example>& train, const std::vector<features::PairFeatures>& val,
                       const std::vector<std::string>& vocab, const fit::TrainConfig& base, const GridSpec& spec,
                       const std::function<void(const GridCell&)>& on_cell) {
  if (val.empty()) throw ValidationError("grid search selects on the validation split, which is empty");
  GridResult out;
  out.cells = enumerate(spec);
  for (auto& cell : out.cells) {
    fit::TrainConfig cfg = base;
    cfg.lr = cell.lr;
    cfg.weights.margin = cell.margin;
    cfg.weights.av = cell.weights[0];
    cfg.weights.vtag = cell.weights[1];
    cfg.weights.atag = cell.weights[2];
    cfg.weights.regular = cell.weights[3];
    cfg.weights.ce = cell.weights[4];
    const auto result = fit::fit(train, val, vocab, cfg);
    retrieval::EvalOptions opts;
    opts.cross = cfg.cross_inference;
    const auto report = retrieval::evaluate(result.model, val, opts);
    cell.val_r1 = report.at(1);
    cell.val_r5 = report.at(5);
    cell.best_epoch = result.best_epoch;
    if (on_cell) on_cell(cell);
  }
  for (std::size_t i = 1; i < out.cells.size(); ++i) {
    const auto& c = out.cells[i];
    const auto& b = out.cells[out.best];
    if (c.val_r1 > b.val_r1 || (c.val_r1 == b.val_r1 && c.val_r5 > b.val_r5)) out.best = i;
  }
  const auto& b = out.cells[out.best];
  out.best_config = base;
  out.best_config.lr = b.lr;
  out.best_config.weights = {b.weights[0], b.weights[1], b.weights[2], b.weights[3], b.weights[4], b.margin};
  return out;
}

nlohmann::json to_json(const GridResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"margin", c.margin},
                     {"lr", c.lr},
                     {"weights", c.weights},
                     {"val_R@1", c.val_r1},
                     {"val_R@5", c.val_r5},
                     {"best_epoch", c.best_epoch}});
  }
  return {{"cells", cells}, {"best", r.best}};
}

}  // namespace vmr::grid
