#include "slotframes/trainer.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "slotframes/metrics.hpp"

namespace slotframes {

using nlohmann::json;

namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C;
constexpr std::uint64_t kSampleStream = 0x5A3F;
constexpr std::uint64_t kAugmentStream = 0xA06E;
constexpr std::uint64_t kEvalStream = 0xE7A1;

// Runs fn(i) for i in [0, n) on up to `threads` workers; each i runs exactly
// once and results are written to per-index slots by the caller.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Tensor<float> image_tensor(const SceneSample& s) { return Tensor<float>::constant(s.image); }

json report_to_json(const EvalReport& r) {
  return json{{"split", r.split},       {"count", r.count}, {"fg_ari", r.fg_ari}, {"ari", r.ari},
              {"mse", r.mse},           {"fg_ari_flagged", r.fg_ari_flagged}};
}

}  // namespace

std::string eval_report_json(const EvalReport& r) { return report_to_json(r).dump(2); }

std::uint64_t eval_scene_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, kEvalStream, index); }

EvalReport evaluate(const Model<float>& model, const ParamStore<float>& params,
                    const std::vector<SceneSample>& scenes, std::uint64_t seed, std::size_t threads,
                    const std::string& split_name) {
  EvalReport r;
  r.split = split_name;
  r.count = scenes.size();
  std::vector<double> fg(scenes.size()), full(scenes.size()), se(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    ParamBinding<float> binding(params, false);
    Rng rng(eval_scene_seed(seed, i));
    const auto out = model.forward(binding, image_tensor(scenes[i]), rng);
    const auto pred = predicted_labels(out.decoded);
    const std::vector<int> truth(scenes[i].labels.begin(), scenes[i].labels.end());
    fg[i] = ari(pred, truth, true);
    full[i] = ari(pred, truth, false);
    se[i] = squared_error(out.reconstruction.value(), scenes[i].image);
  });
  double fg_sum = 0.0, ari_sum = 0.0, se_sum = 0.0;
  std::size_t fg_n = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (std::isnan(fg[i])) {
      ++r.fg_ari_flagged;
    } else {
      fg_sum += fg[i];
      ++fg_n;
    }
    ari_sum += full[i];
    se_sum += se[i];
  }
  r.per_scene_fg_ari = fg;
  r.fg_ari = fg_n ? fg_sum / static_cast<double>(fg_n) : std::nan("");
  r.ari = scenes.empty() ? std::nan("") : ari_sum / static_cast<double>(scenes.size());
  r.mse = scenes.empty() ? std::nan("") : se_sum / static_cast<double>(scenes.size());
  return r;
}

std::vector<std::size_t> batch_indices(std::size_t n_train, std::size_t batch, std::uint64_t seed, std::size_t step) {
  if (n_train == 0) throw ConfigError("training split is empty");
  Rng rng(derive_seed(seed, kBatchStream, step));
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.below(n_train);
  return idx;
}

BatchResult batch_gradients(const Model<float>& model, const ParamStore<float>& params,
                            const std::vector<SceneSample>& train, const RunConfig& cfg, std::size_t step) {
  const std::size_t b = cfg.train.batch_size;
  const auto idx = batch_indices(train.size(), b, cfg.seed, step);
  std::vector<double> losses(b);
  std::vector<std::vector<Array<float>>> grads(b);
  parallel_for(b, cfg.train.threads, [&](std::size_t i) {
    const SceneSample* scene = &train[idx[i]];
    SceneSample shifted;
    if (cfg.data.augment_translation) {
      Rng aug(derive_seed(cfg.seed, kAugmentStream, step * b + i));
      shifted = augment_translate(*scene, aug);
      scene = &shifted;
    }
    ParamBinding<float> binding(params);
    Rng rng(derive_seed(cfg.seed, kSampleStream, step * b + i));
    const auto image = image_tensor(*scene);
    const auto out = model.forward(binding, image, rng);
    const auto loss = reconstruction_loss(out.reconstruction, image);
    backward(loss);
    losses[i] = loss.item();
    grads[i] = binding.gradients();
  });
  BatchResult r;
  r.grads = std::move(grads[0]);
  r.loss = losses[0];
  for (std::size_t i = 1; i < b; ++i) {
    r.loss += losses[i];
    for (std::size_t p = 0; p < r.grads.size(); ++p) {
      auto& dst = r.grads[p];
      const auto& src = grads[i][p];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  const float inv = 1.0f / static_cast<float>(b);
  for (auto& g : r.grads) {
    for (std::size_t j = 0; j < g.size(); ++j) g[j] *= inv;
  }
  r.loss /= static_cast<double>(b);
  return r;
}

TrainResult train(const RunConfig& cfg, const TrainData& data, const TrainOptions& opts) {
  cfg.validate();
  auto log = [&](const std::string& s) {
    if (opts.log) opts.log(s);
  };
  const Model<float> model(cfg.model);
  const std::uint64_t hash = config_hash(cfg);
  const std::string cfg_json = run_config_to_json(cfg);

  Checkpoint ck;
  if (opts.resume) {
    ck = *opts.resume;
    if (ck.config_hash != hash) {
      throw ConfigError("checkpoint config hash " + hash_hex(ck.config_hash) + " does not match config " +
                        hash_hex(hash));
    }
  } else {
    ck.params = init_params(cfg.model, cfg.seed);
    ck.adam = make_adam_state(ck.params);
  }
  ck.seed = cfg.seed;
  ck.config_hash = hash;
  ck.config_json = cfg_json;

  const std::size_t total = cfg.train.total_steps;
  const std::size_t stop = opts.stop_at ? std::min(opts.stop_at, total) : total;
  if (opts.write_files) std::filesystem::create_directories(cfg.out_dir);
  const auto ck_path = cfg.out_dir / "checkpoint.sfck";

  TrainResult result;
  std::ofstream history_file;
  if (opts.write_files) {
    history_file.open(cfg.out_dir / "history.jsonl", opts.resume ? std::ios::app : std::ios::trunc);
  }

  auto run_eval = [&](std::size_t step) {
    EvalRecord rec{step, {}};
    rec.reports.push_back(evaluate(model, ck.params, data.val_iid, cfg.seed, cfg.train.threads, "val_iid"));
    rec.reports.push_back(evaluate(model, ck.params, data.val_ood, cfg.seed, cfg.train.threads, "val_ood"));
    for (const auto& r : rec.reports) {
      log("eval step " + std::to_string(step) + " " + r.split + " fg_ari " + std::to_string(r.fg_ari) + " mse " +
          std::to_string(r.mse));
    }
    if (history_file) {
      json j{{"step", step}, {"eval", json::array()}};
      for (const auto& r : rec.reports) j["eval"].push_back(report_to_json(r));
      history_file << j.dump() << "\n" << std::flush;
    }
    result.history.evals.push_back(std::move(rec));
  };

  for (std::size_t s = ck.step; s < stop; ++s) {
    auto batch = batch_gradients(model, ck.params, data.train, cfg, s);
    if (!std::isfinite(batch.loss)) {
      if (opts.write_files) save_checkpoint(cfg.out_dir / ("nan_step" + std::to_string(s) + ".sfck"), ck);
      throw NumericError("non-finite loss at step " + std::to_string(s));
    }
    if (cfg.train.grad_clip > 0.0) clip_global_norm(batch.grads, cfg.train.grad_clip);
    const double lr = lr_schedule(s + 1, cfg.train);
    adam_step(ck.params, batch.grads, ck.adam, lr, cfg.train);
    ck.step = s + 1;
    result.history.steps.push_back(StepRecord{ck.step, batch.loss, lr});
    if (history_file) {
      history_file << json{{"step", ck.step}, {"loss", batch.loss}, {"lr", lr}}.dump() << "\n";
    }
    if (ck.step % 50 == 0 || ck.step == stop) {
      log("step " + std::to_string(ck.step) + " loss " + std::to_string(batch.loss) + " lr " + std::to_string(lr));
    }
    if (opts.write_files && cfg.train.checkpoint_every && ck.step % cfg.train.checkpoint_every == 0) {
      save_checkpoint(ck_path, ck);
    }
    if (cfg.train.eval_every && ck.step % cfg.train.eval_every == 0 && ck.step != total) run_eval(ck.step);
  }
  if (ck.step == total) run_eval(ck.step);
  if (opts.write_files) {
    save_checkpoint(ck_path, ck);
    result.checkpoint_path = ck_path;
  }
  result.checkpoint = std::move(ck);
  return result;
}

}  // namespace slotframes
