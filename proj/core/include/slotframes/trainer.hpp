#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slotframes/checkpoint.hpp"
#include "slotframes/model.hpp"
#include "slotframes/run_config.hpp"

namespace slotframes {

struct EvalReport {
  std::string split;
  std::size_t count = 0;
  double fg_ari = 0.0;  // mean over scenes with a foreground
  double ari = 0.0;
  double mse = 0.0;  // squared error per image
  std::size_t fg_ari_flagged = 0;  // scenes without foreground, excluded from fg_ari
  std::vector<double> per_scene_fg_ari;
};

/// Forward-only evaluation. Sampled frame initializations are drawn from a
/// stream derived from `seed` and the scene index, so reports are
/// reproducible and independent of the thread count.
/// Seed of the frame-initialization stream used for scene `index` in evaluation.
std::uint64_t eval_scene_seed(std::uint64_t seed, std::size_t index);

EvalReport evaluate(const Model<float>& model, const ParamStore<float>& params,
                    const std::vector<SceneSample>& scenes, std::uint64_t seed, std::size_t threads,
                    const std::string& split_name);

struct StepRecord {
  std::size_t step = 0;  // optimizer steps completed after this record
  double loss = 0.0;
  double lr = 0.0;
};

struct EvalRecord {
  std::size_t step = 0;
  std::vector<EvalReport> reports;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
};

struct TrainData {
  std::vector<SceneSample> train;
  std::vector<SceneSample> val_iid;
  std::vector<SceneSample> val_ood;
};

struct TrainOptions {
  std::optional<Checkpoint> resume;
  std::size_t stop_at = 0;  // stop after this many steps (0 = total_steps)
  bool write_files = true;  // checkpoints, history and report under cfg.out_dir
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  TrainHistory history;
  Checkpoint checkpoint;
  std::filesystem::path checkpoint_path;
};

/// Mean over the batch of the per-image reconstruction loss, and its
/// gradients reduced in sample order. Sample i of step s draws its frames
/// and augmentation from streams keyed on (seed, s, i).
struct BatchResult {
  double loss = 0.0;
  std::vector<Array<float>> grads;
};

BatchResult batch_gradients(const Model<float>& model, const ParamStore<float>& params,
                            const std::vector<SceneSample>& train, const RunConfig& cfg, std::size_t step);

/// Indices of the training scenes used at `step`.
std::vector<std::size_t> batch_indices(std::size_t n_train, std::size_t batch, std::uint64_t seed, std::size_t step);

TrainResult train(const RunConfig& cfg, const TrainData& data, const TrainOptions& opts = {});

std::string eval_report_json(const EvalReport& r);

}  // namespace slotframes
