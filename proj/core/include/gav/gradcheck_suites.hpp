#pragma once

#include <string>
#include <vector>

namespace gav {
namespace suite {

/// One finite-difference comparison: the worst relative error observed for
/// a named operation against the threshold it must stay under.
struct CheckRow {
  std::string name;
  double max_rel_err = 0;
  double threshold = 0;

  bool pass() const { return max_rel_err < threshold; }
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckRow> rows;

  bool all_pass() const;
  double worst() const;
  std::string to_text() const;  // one line per row plus a verdict line
};

/// Available suites: ops (elementwise/linear-algebra primitives), losses,
/// renderer (tile rasterizer), network (feed-forward pass on the micro
/// configuration), end2end (network -> skinning -> renderer -> loss).
std::vector<std::string> suite_names();
SuiteReport run_suite(const std::string& name);

}  // namespace suite
}  // namespace gav
