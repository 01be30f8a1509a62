#include <chrono>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "slotframes/trainer.hpp"
#include "slotframes/verify.hpp"

namespace slotframes::verify {

namespace {

namespace fs = std::filesystem;

RunConfig tiny_run_config(const fs::path& out) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.data.height = 12;
  cfg.data.width = 12;
  cfg.data.block = 2;
  cfg.data.objects_per_scene = 2;
  cfg.data.n_train = 8;
  cfg.data.n_val = 3;
  cfg.data.seed = 9;
  cfg.model.image_height = 12;
  cfg.model.image_width = 12;
  cfg.model.num_slots = 3;
  cfg.model.slot_dim = 16;
  cfg.model.attn_dim = 16;
  cfg.model.mlp_hidden = 16;
  cfg.model.variant.mode = Variant::kIsaTSR;
  cfg.model.encoder.channels = 8;
  cfg.model.encoder.kernel = 3;
  cfg.model.encoder.strides = {1};
  cfg.model.decoder.hidden = 16;
  cfg.model.decoder.mlp_layers = 3;
  cfg.train.total_steps = 6;
  cfg.train.warmup_steps = 2;
  cfg.train.batch_size = 2;
  cfg.train.eval_every = 3;
  cfg.train.checkpoint_every = 3;
  cfg.out_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

SuiteReport determinism_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fs::temp_directory_path() / ("slotframes_determinism_" + std::to_string(::getpid()));
  fs::remove_all(root);

  const auto base = tiny_run_config(root);
  const auto splits = make_splits(base.data);
  const TrainData data{splits.train, splits.val_iid, splits.val_ood};

  // Every run uses the same output directory because the checkpoint records
  // the full config, paths included.
  const auto ck = root / "checkpoint.sfck";
  const auto hist = root / "history.jsonl";
  train(base, data);
  const std::string ck_a = slurp(ck), hist_a = slurp(hist);
  fs::remove_all(root);
  train(base, data);
  const std::string ck_b = slurp(ck), hist_b = slurp(hist);
  fs::remove_all(root);

  TrainOptions first;
  first.stop_at = 3;
  train(base, data, first);
  TrainOptions second;
  second.resume = load_checkpoint(ck);
  train(base, data, second);
  const std::string ck_c = slurp(ck), hist_c = slurp(hist);
  fs::remove_all(root);

  const bool same_ck = !ck_a.empty() && ck_a == ck_b;
  const bool same_hist = !hist_a.empty() && hist_a == hist_b;
  const bool resume_ck = ck_a == ck_c;
  const bool resume_hist = hist_a == hist_c;

  SuiteReport r;
  r.suite = "determinism";
  const std::string detail = "6 steps of a 12x12 ISA-TSR model, batch 2";
  r.properties = {
      {"determinism/repeat_checkpoint_bytes", same_ck, same_ck ? 0.0 : 1.0, 0.0, detail},
      {"determinism/repeat_history_bytes", same_hist, same_hist ? 0.0 : 1.0, 0.0, detail},
      {"determinism/resume_checkpoint_bytes", resume_ck, resume_ck ? 0.0 : 1.0, 0.0,
       detail + ", stopped at step 3 and resumed"},
      {"determinism/resume_history_bytes", resume_hist, resume_hist ? 0.0 : 1.0, 0.0,
       detail + ", stopped at step 3 and resumed"},
  };
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace slotframes::verify
