// Prints one PASS/FAIL line per acceptance criterion; exit code 0 iff all pass.
//
//   slotframes_acceptance [--experiments DIR]
//
// Criterion 7 reads finished training runs from DIR (default: the
// experiments/ directory of the source tree), laid out as
// DIR/<group>/seed<s>/checkpoint.sfck with report.json beside it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <json.hpp>
#include <sstream>

#include "slotframes/checkpoint.hpp"
#include "slotframes/run_config.hpp"
#include "slotframes/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace slotframes;

namespace {

struct Line {
  int id;
  bool passed;
  std::string text;
};

std::string describe(const verify::SuiteReport& r) {
  std::ostringstream os;
  std::size_t ok = 0;
  for (const auto& p : r.properties) ok += p.passed;
  os << r.suite << " " << ok << "/" << r.properties.size() << " properties";
  for (const auto& p : r.properties) {
    if (!p.passed) os << "; failed " << p.name << " measured " << p.measured << " > " << p.tolerance;
  }
  return os.str();
}

Line from_suites(int id, const std::string& what, const std::vector<verify::SuiteReport>& suites) {
  bool ok = true;
  std::string text = what + ":";
  for (const auto& s : suites) {
    ok = ok && s.passed();
    text += " [" + describe(s) + "]";
  }
  return {id, ok, text};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Group {
  std::string name;
  Variant variant;
  std::size_t n_train;
  PositionBias bias;
  std::string split;  // split whose FG-ARI the criterion reads
};

const std::vector<Group> kGroups{
    {"isa_t_n1024", Variant::kIsaT, 1024, PositionBias::kNone, "val_iid"},
    {"isa_t_n256", Variant::kIsaT, 256, PositionBias::kNone, "val_iid"},
    {"sa_n256", Variant::kSA, 256, PositionBias::kNone, "val_iid"},
    {"isa_t_left", Variant::kIsaT, 1024, PositionBias::kLeftHalf, "val_ood"},
    {"sa_left", Variant::kSA, 1024, PositionBias::kLeftHalf, "val_ood"},
};
constexpr std::size_t kSeeds = 3;

// FG-ARI of a finished run, or an explanation of why it does not count.
std::optional<double> run_fg_ari(const fs::path& dir, const Group& g, std::string* why) {
  const auto ck_file = dir / "checkpoint.sfck";
  const auto report_file = dir / "report.json";
  if (!fs::exists(ck_file) || !fs::exists(report_file)) {
    *why = "missing";
    return std::nullopt;
  }
  const auto ck = load_checkpoint(ck_file);
  const auto cfg = parse_run_config(ck.config_json);
  const auto& m = cfg.model;
  const bool matches = cfg.data.height == 35 && cfg.data.width == 35 && cfg.data.objects_per_scene == 3 &&
                       m.num_slots == 4 && m.slot_dim == 64 && m.variant.iterations == 3 &&
                       cfg.train.batch_size == 16 && cfg.train.total_steps == 5000 && m.variant.mode == g.variant &&
                       cfg.data.n_train == g.n_train && cfg.data.position_bias == g.bias;
  if (!matches) {
    *why = "config differs from the criterion";
    return std::nullopt;
  }
  if (ck.step != cfg.train.total_steps) {
    *why = "stopped at step " + std::to_string(ck.step);
    return std::nullopt;
  }
  std::ifstream in(report_file);
  const auto report = json::parse(in);
  for (const auto& r : report.at("eval")) {
    if (r.at("split") == g.split && r.at("fg_ari").is_number()) return r.at("fg_ari").get<double>();
  }
  *why = "report has no " + g.split + " FG-ARI";
  return std::nullopt;
}

Line learning_criterion(const fs::path& root) {
  std::map<std::string, std::vector<std::optional<double>>> scores;
  std::size_t available = 0;
  std::string problems;
  for (const auto& g : kGroups) {
    for (std::size_t s = 0; s < kSeeds; ++s) {
      std::string why;
      const auto dir = root / g.name / ("seed" + std::to_string(s));
      std::optional<double> v;
      try {
        v = run_fg_ari(dir, g, &why);
      } catch (const std::exception& e) {
        why = e.what();
      }
      scores[g.name].push_back(v);
      if (v) {
        ++available;
      } else if (why != "missing") {
        problems += "; " + g.name + "/seed" + std::to_string(s) + ": " + why;
      }
    }
  }
  std::ostringstream os;
  os << "desk-scale learning: " << available << "/" << kGroups.size() * kSeeds << " runs available under "
     << root.string() << problems;
  if (available < kGroups.size() * kSeeds) return {7, false, os.str()};

  auto values = [&](const std::string& name) {
    std::vector<double> v;
    for (const auto& x : scores[name]) v.push_back(*x);
    return v;
  };
  const double a = median(values("isa_t_n1024"));
  const double b_isa = median(values("isa_t_n256")), b_sa = median(values("sa_n256"));
  const auto left_isa = values("isa_t_left"), left_sa = values("sa_left");
  std::size_t wins = 0;
  for (std::size_t s = 0; s < kSeeds; ++s) wins += left_isa[s] > left_sa[s];
  const bool pa = a >= 0.85, pb = b_isa >= b_sa, pc = wins >= 2;
  os << "; (a) ISA-T n=1024 median FG-ARI " << a << (pa ? " >= " : " < ") << "0.85"
     << "; (b) n=256 median ISA-T " << b_isa << (pb ? " >= " : " < ") << "SA " << b_sa
     << "; (c) left-biased val_ood ISA-T > SA in " << wins << "/3 seeds";
  return {7, pa && pb && pc, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path experiments = SLOTFRAMES_SOURCE_DIR "/experiments";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--experiments") == 0 && i + 1 < argc) {
      experiments = argv[++i];
    } else {
      std::cerr << "usage: slotframes_acceptance [--experiments DIR]\n";
      return 2;
    }
  }

  std::vector<Line> lines;
  const auto t0 = std::chrono::steady_clock::now();
  const auto grad = verify::grad_suite();
  const double grad_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto l1 = from_suites(1, "gradient suite", {grad});
  l1.passed = l1.passed && grad_seconds < 120.0;
  l1.text += " runtime " + std::to_string(grad_seconds) + " s (limit 120 s)";
  lines.push_back(l1);
  lines.push_back(from_suites(2, "frame equivariance", {verify::frames_suite()}));
  lines.push_back(from_suites(3, "rel-grid statistics", {verify::relgrid_suite()}));
  lines.push_back(from_suites(4, "structural invariants", {verify::structural_suite()}));
  lines.push_back(from_suites(5, "metric oracle", {verify::metrics_suite()}));
  lines.push_back(from_suites(6, "ablation contracts", {verify::ablation_suite()}));
  lines.push_back(learning_criterion(experiments));
  lines.push_back(from_suites(8, "determinism", {verify::determinism_suite()}));

  bool all = true;
  for (const auto& l : lines) {
    std::cout << "criterion " << l.id << " " << (l.passed ? "PASS" : "FAIL") << " " << l.text << "\n";
    all = all && l.passed;
  }
  std::cout << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << "\n";
  return all ? 0 : 1;
}
