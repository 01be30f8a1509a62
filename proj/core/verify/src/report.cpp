#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "slotframes/array.hpp"
#include "slotframes/verify.hpp"

namespace slotframes::verify {

bool SuiteReport::passed() const {
  for (const auto& p : properties) {
    if (!p.passed) return false;
  }
  return !properties.empty();
}

std::vector<std::string> suite_names() {
  return {"grad", "equivariance", "metrics", "ablation", "determinism", "all"};
}

std::vector<SuiteReport> run_suites(const std::string& name, const std::function<void(const SuiteReport&)>& on_done) {
  using Suite = SuiteReport (*)();
  std::vector<Suite> selected;
  if (name == "grad" || name == "all") selected.push_back(&grad_suite);
  if (name == "equivariance" || name == "all") {
    selected.push_back(&frames_suite);
    selected.push_back(&relgrid_suite);
    selected.push_back(&structural_suite);
  }
  if (name == "metrics" || name == "all") selected.push_back(&metrics_suite);
  if (name == "ablation" || name == "all") selected.push_back(&ablation_suite);
  if (name == "determinism" || name == "all") selected.push_back(&determinism_suite);
  if (selected.empty()) throw ConfigError("unknown verify suite '" + name + "'");
  std::vector<SuiteReport> out;
  for (auto suite : selected) {
    out.push_back(suite());
    if (on_done) on_done(out.back());
  }
  return out;
}

std::string to_json(const std::vector<SuiteReport>& reports) {
  using nlohmann::json;
  // JSON has no infinities; report them as null.
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = json::array();
  bool all = true;
  for (const auto& r : reports) {
    json props = json::array();
    for (const auto& p : r.properties) {
      props.push_back({{"name", p.name},
                       {"passed", p.passed},
                       {"measured", num(p.measured)},
                       {"tolerance", num(p.tolerance)},
                       {"detail", p.detail}});
    }
    all = all && r.passed();
    j.push_back({{"suite", r.suite}, {"passed", r.passed()}, {"seconds", r.seconds}, {"properties", props}});
  }
  return json{{"passed", all}, {"suites", j}}.dump(2);
}

}  // namespace slotframes::verify
