#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"

using slotframes::cli::Options;

int main(int argc, char** argv) {
  CLI::App app{"Slot attention with per-slot reference frames on procedural tetromino scenes"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--out", o.out, "Output file or directory");
    cmd->add_option("--seed", seed, "Override the seed");
    cmd->add_option("--threads", threads, "Worker threads");
    cmd->add_flag("--force", o.force, "Overwrite existing outputs");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate train/val_iid/val_ood split files (--seed sets the data seed)");
  gen->add_option("--config", o.config, "Run config JSON")->required();
  common(gen);

  auto* tr = app.add_subcommand("train", "Train a model (--seed sets the model and training seed)");
  tr->add_option("--config", o.config, "Run config JSON")->required();
  tr->add_option("--checkpoint", o.checkpoints, "Resume from this checkpoint");
  common(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints (or the untrained model of --config) on a split");
  ev->add_option("--config", o.config, "Run config JSON, used when no checkpoint is given");
  ev->add_option("--checkpoint", o.checkpoints, "Checkpoint file; repeat for one run per seed");
  ev->add_option("--split", o.split, "train, val_iid or val_ood");
  common(ev);

  auto* ve = app.add_subcommand("verify", "Run property suites; exit 0 iff every property passes");
  ve->add_option("suite", o.suite, "grad, equivariance, metrics, ablation, determinism or all");
  common(ve);

  auto* vi = app.add_subcommand("visualize", "Write input, reconstruction, masks and frame overlay PNGs");
  vi->add_option("--config", o.config, "Run config JSON, used when no checkpoint is given");
  vi->add_option("--checkpoint", o.checkpoints, "Checkpoint file");
  vi->add_option("--split", o.split, "train, val_iid or val_ood");
  vi->add_option("--index", o.index, "Scene index within the split");
  vi->add_option("--scale", o.scale, "Pixels per image pixel");
  common(vi);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return slotframes::cli::kExitUsage;
  }
  for (auto* cmd : app.get_subcommands()) {
    if (cmd->count("--seed")) o.seed = seed;
    if (cmd->count("--threads")) o.threads = threads;
  }
  return slotframes::cli::run_command(app.get_subcommands().front()->get_name(), o, std::cout, std::cerr);
}
