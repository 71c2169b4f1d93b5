#pragma once

#include <string>
#include <vector>

namespace fl {

// One oracle comparison: a measured statistic against the bound it must stay
// under (or exceed, for divergence evidence). Oracles are closed forms or
// independent numerical routes, never the code path being checked.
struct OracleRow {
  std::string name;
  double measured = 0;
  double bound = 0;
  bool exceed = false;  // pass means measured > bound instead of <
  bool pass = false;
};

// The built-in example suite: named models with independently known answers,
// each runs in well under a second at default tolerances.
std::vector<OracleRow> run_example_oracles();

// Render as an aligned text table with a PASS/FAIL verdict line at the end.
std::string oracle_table(const std::vector<OracleRow>& rows);

}  // namespace fl
