#include <chrono>
#include <cmath>
#include <numeric>

#include "slotframes/metrics.hpp"
#include "slotframes/oracles.hpp"
#include "slotframes/verify.hpp"

namespace slotframes::verify {

SuiteReport metrics_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  double oracle_err = 0, sym_err = 0, relabel_err = 0, fg_err = 0;
  const std::size_t pairs = 1000;
  for (std::size_t c = 0; c < pairs; ++c) {
    Rng rng(derive_seed(4000, c));
    const std::size_t n = 1 + rng.below(12);
    const int kp = 1 + static_cast<int>(rng.below(5)), kt = 1 + static_cast<int>(rng.below(5));
    std::vector<int> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.below(kp));
      truth[i] = static_cast<int>(rng.below(kt));
    }
    const double got = ari(pred, truth, false);
    oracle_err = std::max(oracle_err, std::abs(got - oracle::pair_counting_ari(pred, truth)));
    sym_err = std::max(sym_err, std::abs(got - ari(truth, pred, false)));

    // Relabel both sides with random injective id maps.
    std::vector<int> ids(8);
    std::iota(ids.begin(), ids.end(), 3);
    for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);
    std::vector<int> rp(n), rt(n);
    for (std::size_t i = 0; i < n; ++i) {
      rp[i] = ids[pred[i]];
      rt[i] = ids[7 - truth[i]];
    }
    relabel_err = std::max(relabel_err, std::abs(got - ari(rp, rt, false)));

    // Foreground-only equals the full ARI on the true-foreground subset.
    std::vector<int> fp, ft;
    for (std::size_t i = 0; i < n; ++i) {
      if (truth[i] != 0) {
        fp.push_back(pred[i]);
        ft.push_back(truth[i]);
      }
    }
    const double fg = ari(pred, truth, true);
    if (ft.empty()) {
      if (!std::isnan(fg)) fg_err = INFINITY;
    } else {
      fg_err = std::max(fg_err, std::abs(fg - oracle::pair_counting_ari(fp, ft)));
    }
  }
  const std::vector<int> p{0, 0, 1, 1}, t{0, 1, 0, 1};
  const double example = ari(p, t, false);

  SuiteReport r;
  r.suite = "metrics";
  const std::string detail = std::to_string(pairs) + " random partition pairs, n <= 12";
  r.properties = {
      {"metrics/ari_vs_pair_counting", oracle_err <= 1e-12, oracle_err, 1e-12, detail},
      {"metrics/ari_symmetric", sym_err <= 1e-12, sym_err, 1e-12, detail},
      {"metrics/ari_relabel_invariant", relabel_err <= 1e-12, relabel_err, 1e-12, detail},
      {"metrics/fg_ari_vs_pair_counting", fg_err <= 1e-12, fg_err, 1e-12, detail + ", empty foreground gives NaN"},
      {"metrics/ari_worked_example", std::abs(example + 0.5) <= 1e-12, std::abs(example + 0.5), 1e-12,
       "[0,0,1,1] vs [0,1,0,1] is -0.5"},
  };
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace slotframes::verify
