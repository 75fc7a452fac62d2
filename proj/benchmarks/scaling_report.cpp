// SPDX-License-Identifier: Apache-2.0
//
// Prints the scaling measurements behind the complexity claims: the
// adjoint engine is linear in grid cells and nt, the per-cell baseline
// gradient is quadratic in cells. Writes a CSV when given a path.

#include <cstdio>
#include <fstream>
#include <string>

#include "nwi/scaling.hpp"

using namespace nwi;

namespace {

void print_series(const char* name, const std::vector<ScalingPoint>& pts) {
  for (const auto& p : pts) std::printf("  %-10s size %10.0f  %.6f s\n", name, p.size, p.seconds);
}

void dump_csv(std::ofstream& os, const char* engine, const char* axis,
              const std::vector<ScalingPoint>& pts) {
  for (const auto& p : pts) os << engine << "," << axis << "," << p.size << "," << p.seconds
                               << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string csv_path = argc > 1 ? argv[1] : "";

  const ScalingReport adj =
      bench_adjoint_scaling({48, 64, 96}, 240, {240, 480, 960}, 48);
  const ScalingReport fwi = bench_fwi_scaling({8, 12, 16, 24}, 16, {16, 24, 32, 48, 64}, 12, 5);

  std::printf("machine: %s\n\n", adj.machine.c_str());
  std::printf("adjoint engine (forward_with_tape + backprop)\n");
  print_series("cells", adj.vs_cells);
  print_series("nt", adj.vs_nt);
  std::printf("  slopes: cells %.3f, nt %.3f\n\n", adj.slope_cells, adj.slope_nt);
  std::printf("per-cell baseline gradient (fwi_gradient)\n");
  print_series("cells", fwi.vs_cells);
  print_series("nt", fwi.vs_nt);
  std::printf("  slopes: cells %.3f, nt %.3f\n", fwi.slope_cells, fwi.slope_nt);
  std::printf("  separation (fwi - adjoint, cells): %.3f\n",
              fwi.slope_cells - adj.slope_cells);

  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    os << "engine,axis,size,seconds\n";
    dump_csv(os, "adjoint", "cells", adj.vs_cells);
    dump_csv(os, "adjoint", "nt", adj.vs_nt);
    dump_csv(os, "fwi", "cells", fwi.vs_cells);
    dump_csv(os, "fwi", "nt", fwi.vs_nt);
    std::printf("wrote %s\n", csv_path.c_str());
  }
  return 0;
}
