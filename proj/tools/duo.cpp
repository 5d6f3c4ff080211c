// duo: command-line front end. See README.md for the command reference.

#include <iostream>

#include <CLI11.hpp>

#include "duo/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace duo::cli;
  CLI::App app{"Two-body pose forecasting: training, evaluation and studies"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::uint64_t seed = 0;
  auto add_globals = [&](CLI::App* c) {
    c->add_option("--config", g.config, "JSON config file");
    c->add_option("--out", g.out, "output directory");
    c->add_option("--seed", seed, "override the config seed");
    c->add_option("--threads", g.threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
    c->add_flag("--emit-gnuplot", g.emit_gnuplot, "write a gnuplot script next to the CSV");
  };

  auto* train = app.add_subcommand("train", "train a model and evaluate it on the test split");
  add_globals(train);

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_globals(eval);
  eval->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  eval->add_option("--horizons", ev.horizons_ms, "horizons in ms (multiples of 40)")->delimiter(',');

  auto* ablate = app.add_subcommand("ablate", "train and score every row of an ablation matrix");
  add_globals(ablate);

  auto* study = app.add_subcommand("init-study", "seed stability and variance probe per init scheme");
  add_globals(study);

  std::size_t max_t = 128;
  auto* dct = app.add_subcommand("dct-check", "orthonormality and round-trip self-check");
  dct->add_option("--max-t", max_t, "largest transform length")->check(CLI::PositiveNumber);

  SynthOptions sy;
  auto* synth = app.add_subcommand("synth", "write a synthetic two-body sequence CSV");
  add_globals(synth);
  synth->add_option("--sequences", sy.sequences)->check(CLI::PositiveNumber);
  synth->add_option("--frames", sy.frames);
  synth->add_option("--joints", sy.joints)->check(CLI::PositiveNumber);
  synth->add_option("--bodies", sy.bodies)->check(CLI::Range(1, 2));
  synth->add_option("--style", sy.style, "JSON style file");
  synth->add_option("--skeleton", sy.skeleton, "JSON skeleton file");
  synth->add_option("--output", sy.output, "CSV path (default <out>/sequences.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  for (auto* c : {train, eval, ablate, study, synth})
    if (c->parsed() && c->count("--seed")) g.seed = seed;

  if (train->parsed()) return cmd_train(g, std::cout, std::cerr);
  if (eval->parsed()) return cmd_eval(g, ev, std::cout, std::cerr);
  if (ablate->parsed()) return cmd_ablate(g, std::cout, std::cerr);
  if (study->parsed()) return cmd_init_study(g, std::cout, std::cerr);
  if (dct->parsed()) return cmd_dct_check(max_t, std::cout, std::cerr);
  if (synth->parsed()) return cmd_synth(g, sy, std::cout, std::cerr);
  return kConfig;
}
