#include "gipcnn/cost.hpp"

#include <sstream>

namespace gipcnn {

std::string render_report(const CostReport& report) {
  std::ostringstream os;
  os << "layer           kind        g_in    g_out   lvl_in  lvl_out boot  "
        "rot      ctmul    ptmul    adds     bstrap  depth\n";
  auto col = [&os](const std::string& s, int w) {
    os << s;
    for (int i = static_cast<int>(s.size()); i < w; ++i) os << ' ';
  };
  for (const LayerCost& l : report.layers) {
    col(l.node_id, 16);
    col(l.kind, 12);
    col(l.factor_in, 8);
    col(l.factor_out, 8);
    col(std::to_string(l.level_in), 8);
    col(std::to_string(l.level_out), 8);
    col(l.bootstrap_before ? "yes" : "-", 6);
    col(std::to_string(l.counters.rotations), 9);
    col(std::to_string(l.counters.ct_ct_mults), 9);
    col(std::to_string(l.counters.pt_ct_mults), 9);
    col(std::to_string(l.counters.adds), 9);
    col(std::to_string(l.counters.bootstraps), 8);
    os << l.depth << "\n";
  }
  col("TOTAL", 16);
  col("", 12);
  col("", 8);
  col("", 8);
  col("", 8);
  col("", 8);
  col("", 6);
  col(std::to_string(report.totals.rotations), 9);
  col(std::to_string(report.totals.ct_ct_mults), 9);
  col(std::to_string(report.totals.pt_ct_mults), 9);
  col(std::to_string(report.totals.adds), 9);
  col(std::to_string(report.totals.bootstraps), 8);
  os << report.max_depth << "\n";
  return os.str();
}

}  // namespace gipcnn
