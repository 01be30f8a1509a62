#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "render.hpp"
#include "slotframes/dataset_io.hpp"
#include "slotframes/metrics.hpp"
#include "slotframes/trainer.hpp"
#include "slotframes/verify.hpp"

namespace slotframes::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

bool same_spec(const DatasetSpec& a, const DatasetSpec& b) {
  return a.height == b.height && a.width == b.width && a.objects_per_scene == b.objects_per_scene &&
         a.block == b.block && a.n_train == b.n_train && a.n_val == b.n_val && a.position_bias == b.position_bias &&
         a.seed == b.seed && a.augment_translation == b.augment_translation;
}

bool non_empty_dir(const fs::path& p) { return fs::exists(p) && fs::is_directory(p) && !fs::is_empty(p); }

// Reads the split file under data_dir if there is one, otherwise generates
// the split in memory (generation is deterministic in the spec).
std::vector<SceneSample> load_split(const RunConfig& cfg, Split split, std::ostream& log) {
  const auto file = split_path(cfg.data_dir, split);
  if (!fs::exists(file)) {
    log << "no " << file.string() << ", generating " << to_string(split) << " in memory\n";
    return generate_split(cfg.data, split);
  }
  auto f = read_split(file);
  if (!same_spec(f.spec, cfg.data)) {
    throw ConfigError(file.string() + " was generated from a different data spec; rerun gen-data with --force");
  }
  return std::move(f.scenes);
}

RunConfig require_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  return load_run_config(o.config);
}

void apply_threads(const Options& o, RunConfig& cfg) {
  if (o.threads) {
    if (*o.threads == 0) throw ConfigError("--threads must be at least 1");
    cfg.train.threads = *o.threads;
  }
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream f(file, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + file.string());
  f << text;
  if (!f) throw Error("failed writing " + file.string());
}

void emit(const Options& o, const json& report, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
    return;
  }
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  write_text(o.out, text);
}

json report_json(const EvalReport& r) {
  std::vector<double> fg;
  for (double v : r.per_scene_fg_ari) {
    if (!std::isnan(v)) fg.push_back(v);
  }
  std::sort(fg.begin(), fg.end());
  json per_scene{{"count", fg.size()}};
  if (!fg.empty()) {
    per_scene["min"] = fg.front();
    per_scene["median"] = fg.size() % 2 ? fg[fg.size() / 2] : 0.5 * (fg[fg.size() / 2 - 1] + fg[fg.size() / 2]);
    per_scene["max"] = fg.back();
  }
  return json{{"split", r.split},
              {"count", r.count},
              {"fg_ari", number(r.fg_ari)},
              {"ari", number(r.ari)},
              {"mse", number(r.mse)},
              {"fg_ari_flagged", r.fg_ari_flagged},
              {"fg_ari_per_scene", per_scene}};
}

double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// A model to run: parameters plus the run config they belong to.
struct LoadedModel {
  RunConfig cfg;
  ParamStore<float> params;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::string checkpoint;       // empty for an untrained model
  std::string checkpoint_hash;  // empty for an untrained model
};

LoadedModel load_checkpoint_model(const fs::path& file) {
  if (!fs::exists(file)) throw ConfigError("checkpoint " + file.string() + " does not exist");
  auto ck = load_checkpoint(file);
  LoadedModel m;
  m.cfg = parse_run_config(ck.config_json);
  m.params = std::move(ck.params);
  m.step = ck.step;
  m.seed = ck.seed;
  m.checkpoint = file.string();
  m.checkpoint_hash = hash_hex(file_hash(file));
  return m;
}

// Models named by --checkpoint, or the untrained model of --config.
std::vector<LoadedModel> load_models(const Options& o) {
  std::vector<LoadedModel> models;
  for (const auto& file : o.checkpoints) models.push_back(load_checkpoint_model(file));
  if (models.empty()) {
    LoadedModel m;
    m.cfg = require_config(o);
    if (o.seed) m.cfg.seed = *o.seed;
    m.cfg.validate();
    m.seed = m.cfg.seed;
    m.params = init_params(m.cfg.model, m.cfg.seed);
    models.push_back(std::move(m));
  }
  for (auto& m : models) {
    apply_threads(o, m.cfg);
    if (o.seed) m.seed = *o.seed;
  }
  return models;
}

}  // namespace

int cmd_gen_data(const Options& o, std::ostream& out, std::ostream& log) {
  auto cfg = require_config(o);
  if (o.seed) cfg.data.seed = *o.seed;
  cfg.validate();
  const fs::path dir = o.out.empty() ? cfg.data_dir : o.out;
  if (non_empty_dir(dir) && !o.force) throw ConfigError(dir.string() + " is not empty (pass --force to overwrite)");
  fs::create_directories(dir);
  json files = json::array();
  for (Split split : {Split::kTrain, Split::kValIid, Split::kValOod}) {
    const auto scenes = generate_split(cfg.data, split);
    const auto file = split_path(dir, split);
    write_split(file, cfg.data, split, scenes);
    log << "wrote " << scenes.size() << " scenes to " << file.string() << "\n";
    files.push_back({{"split", to_string(split)}, {"file", file.string()}, {"count", scenes.size()},
                     {"hash", hash_hex(file_hash(file))}});
  }
  out << json{{"data_dir", dir.string()}, {"splits", files}}.dump(2) << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& log) {
  auto cfg = require_config(o);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  apply_threads(o, cfg);
  cfg.validate();
  if (o.checkpoints.size() > 1) throw ConfigError("train resumes from at most one --checkpoint");

  TrainOptions opts;
  opts.log = [&log](const std::string& s) { log << s << "\n" << std::flush; };
  if (!o.checkpoints.empty()) {
    opts.resume = load_checkpoint(o.checkpoints.front());
    log << "resuming from step " << opts.resume->step << "\n";
  } else if (fs::exists(cfg.out_dir / "checkpoint.sfck") && !o.force) {
    throw ConfigError(cfg.out_dir.string() + " already holds a run (pass --force to overwrite or --checkpoint to resume)");
  }

  const TrainData data{load_split(cfg, Split::kTrain, log), load_split(cfg, Split::kValIid, log),
                       load_split(cfg, Split::kValOod, log)};
  const auto result = train(cfg, data, opts);

  json report{{"checkpoint", result.checkpoint_path.string()},
              {"checkpoint_hash", hash_hex(file_hash(result.checkpoint_path))},
              {"config_hash", hash_hex(config_hash(cfg))},
              {"seed", cfg.seed},
              {"step", result.checkpoint.step},
              {"eval", json::array()}};
  if (!result.history.steps.empty()) report["final_loss"] = number(result.history.steps.back().loss);
  if (!result.history.evals.empty()) {
    for (const auto& r : result.history.evals.back().reports) report["eval"].push_back(report_json(r));
  }
  write_text(cfg.out_dir / "report.json", report.dump(2) + "\n");
  out << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& log) {
  const Split split = split_from_string(o.split);
  const auto models = load_models(o);
  json runs = json::array();
  std::vector<double> fg, full, se;
  for (const auto& m : models) {
    const Model<float> model(m.cfg.model);
    const auto scenes = load_split(m.cfg, split, log);
    const auto r = evaluate(model, m.params, scenes, m.seed, m.cfg.train.threads, to_string(split));
    log << (m.checkpoint.empty() ? "untrained model" : m.checkpoint) << ": fg_ari " << r.fg_ari << " ari " << r.ari
        << " mse " << r.mse << "\n";
    auto j = report_json(r);
    j["checkpoint"] = m.checkpoint.empty() ? json(nullptr) : json(m.checkpoint);
    j["checkpoint_hash"] = m.checkpoint_hash.empty() ? json(nullptr) : json(m.checkpoint_hash);
    j["config_hash"] = hash_hex(config_hash(m.cfg));
    j["variant"] = to_string(m.cfg.model.variant.mode);
    j["step"] = m.step;
    j["seed"] = m.seed;
    runs.push_back(j);
    fg.push_back(r.fg_ari);
    full.push_back(r.ari);
    se.push_back(r.mse);
  }
  json report{{"split", to_string(split)},
              {"fg_ari", number(median(fg))},
              {"ari", number(median(full))},
              {"mse", number(median(se))},
              {"statistic", "median over runs"},
              {"runs", runs}};
  if (models.size() == 1) report["checkpoint_hash"] = runs[0]["checkpoint_hash"];
  emit(o, report, out);
  return kExitOk;
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& log) {
  const auto reports = verify::run_suites(o.suite, [&log](const verify::SuiteReport& r) {
    for (const auto& p : r.properties) {
      log << (p.passed ? "PASS " : "FAIL ") << r.suite << "/" << p.name << " measured " << p.measured
          << " tolerance " << p.tolerance << (p.detail.empty() ? "" : " (" + p.detail + ")") << "\n";
    }
    log << r.suite << ": " << (r.passed() ? "pass" : "FAIL") << " in " << r.seconds << " s\n" << std::flush;
  });
  const bool ok = std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed(); });
  const std::string text = verify::to_json(reports);
  if (o.out.empty()) {
    out << text << "\n";
  } else {
    if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
    write_text(o.out, text + "\n");
  }
  return ok ? kExitOk : kExitRuntime;
}

int cmd_visualize(const Options& o, std::ostream& out, std::ostream& log) {
  if (o.checkpoints.size() > 1) throw ConfigError("visualize takes at most one --checkpoint");
  if (o.out.empty()) throw ConfigError("--out directory is required");
  if (o.scale == 0) throw ConfigError("--scale must be at least 1");
  const auto m = load_models(o).front();
  const Split split = split_from_string(o.split);
  const auto scenes = load_split(m.cfg, split, log);
  if (o.index >= scenes.size()) {
    throw ConfigError("--index " + std::to_string(o.index) + " is out of range for " + std::to_string(scenes.size()) +
                      " scenes");
  }
  if (non_empty_dir(o.out) && !o.force) throw ConfigError(o.out.string() + " is not empty (pass --force to overwrite)");
  fs::create_directories(o.out);

  const Model<float> model(m.cfg.model);
  const auto& scene = scenes[o.index];
  ParamBinding<float> binding(m.params, false);
  Rng rng(eval_scene_seed(m.seed, o.index));
  const auto res = model.forward(binding, Tensor<float>::constant(scene.image), rng);
  const auto& alpha = res.decoded.alpha.value();
  const std::size_t k = alpha.dim(0);

  json files = json::array();
  auto save = [&](const std::string& name, const RgbImage& img) {
    write_png(o.out / name, img);
    files.push_back(name);
  };
  save("input.png", to_rgb(scene.image, o.scale));
  save("reconstruction.png", to_rgb(res.reconstruction.value(), o.scale));
  auto seg = soft_segmentation(alpha, o.scale);
  const auto& grid = model.grid();
  json frames = json::array();
  const auto& f = res.slots.frames;
  for (std::size_t s = 0; s < k; ++s) {
    const auto g = frame_glyph(f, s, grid.height, grid.width, seg.width, seg.height);
    draw_glyph(seg, g, slot_color(s));
    frames.push_back({{"slot", s},
                      {"position", {f.position.value()[s * 2], f.position.value()[s * 2 + 1]}},
                      {"scale", {f.scale.value()[s * 2], f.scale.value()[s * 2 + 1]}},
                      {"rotation",
                       {{f.rotation.value()[s * 4], f.rotation.value()[s * 4 + 1]},
                        {f.rotation.value()[s * 4 + 2], f.rotation.value()[s * 4 + 3]}}},
                      {"arrow_angle_deg", g.angle * 180.0 / std::numbers::pi}});
  }
  save("segmentation.png", seg);
  for (std::size_t s = 0; s < k; ++s) save("mask_" + std::to_string(s) + ".png", mask_image(alpha, s, o.scale));

  const auto pred = predicted_labels(res.decoded);
  const std::vector<int> truth(scene.labels.begin(), scene.labels.end());
  json report{{"split", to_string(split)},
              {"index", o.index},
              {"checkpoint", m.checkpoint.empty() ? json(nullptr) : json(m.checkpoint)},
              {"checkpoint_hash", m.checkpoint_hash.empty() ? json(nullptr) : json(m.checkpoint_hash)},
              {"variant", to_string(m.cfg.model.variant.mode)},
              {"fg_ari", number(ari(pred, truth, true))},
              {"frames", frames},
              {"files", files}};
  write_text(o.out / "frames.json", report.dump(2) + "\n");
  log << "wrote " << files.size() << " images to " << o.out.string() << "\n";
  out << report.dump(2) << "\n";
  return kExitOk;
}

int run_command(const std::string& command, const Options& o, std::ostream& out, std::ostream& log) {
  try {
    if (command == "gen-data") return cmd_gen_data(o, out, log);
    if (command == "train") return cmd_train(o, out, log);
    if (command == "eval") return cmd_eval(o, out, log);
    if (command == "verify") return cmd_verify(o, out, log);
    if (command == "visualize") return cmd_visualize(o, out, log);
    log << "error: unknown command '" << command << "'\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace slotframes::cli
