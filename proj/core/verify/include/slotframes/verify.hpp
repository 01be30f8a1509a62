#pragma once

#include <functional>
#include <string>
#include <vector>

namespace slotframes::verify {

/// One checked property: the measured worst-case quantity against its limit.
struct PropertyResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<PropertyResult> properties;
  double seconds = 0.0;

  bool passed() const;
};

// Suites. Each runs deterministic random instances from fixed seeds.
SuiteReport grad_suite();         // finite differences for every op and the composed ISA-TSR loss
SuiteReport frames_suite();       // translation equivariance and rotation recovery of frame estimates
SuiteReport relgrid_suite();      // weighted statistics of rel_grid under estimated frames
SuiteReport structural_suite();   // normalizations, rotations, permutation equivariance, frame consistency
SuiteReport metrics_suite();      // ARI against the pair-counting oracle
SuiteReport ablation_suite();     // stop_grad_frames, decoder_only_rel, append_frames contracts
SuiteReport determinism_suite();  // short training runs: repeatability and checkpoint resume

/// Suite names accepted by run_suites: grad, equivariance (frames, relgrid,
/// structural), metrics, ablation, determinism, all.
std::vector<std::string> suite_names();
std::vector<SuiteReport> run_suites(const std::string& name,
                                    const std::function<void(const SuiteReport&)>& on_done = {});

std::string to_json(const std::vector<SuiteReport>& reports);

}  // namespace slotframes::verify
