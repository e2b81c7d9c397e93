// cfsdcn command-line tool. Every failure ends with exit status != 0 and one
// line on stderr:  error: <code>: <message>
//
//   code              status
//   usage             2   bad flags or arguments
//   invalid-argument  2   values rejected by the library
//   format            3   unreadable or malformed file
//   shape             4   incompatible dimensions
//   config            5   config file error
//   diverged          6   training produced non-finite values
//   gradcheck-failed  7
//   internal          1   anything else

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfsdcn/config.hpp"
#include "cfsdcn/hsc_io.hpp"
#include "cfsdcn/train.hpp"
#include "cfsdcn_version.hpp"
#include "commands.hpp"

namespace {

int fail(const char* code, const std::string& message, int status) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n') c = ' ';
  }
  std::fprintf(stderr, "error: %s: %s\n", code, line.c_str());
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cfsdcn::cli;
  const Argv args(argv, argv + argc);

  CLI::App app{"CASSI simulation and CFSDCN reconstruction"};
  // --h and --w are image dimensions, so help is long-form only; subcommands inherit this.
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", CFSDCN_VERSION_TAG);
  app.require_subcommand(1);

  GenMaskArgs gm;
  auto* c_mask = app.add_subcommand("gen-mask", "Write a random binary coded-aperture mask");
  c_mask->add_option("--h", gm.h, "Rows")->required();
  c_mask->add_option("--w", gm.w, "Columns")->required();
  c_mask->add_option("--density", gm.density, "Open fraction in [0, 1]")->capture_default_str();
  c_mask->add_option("--seed", gm.seed)->capture_default_str();
  c_mask->add_option("--out", gm.out, "Output HSC stem")->required();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Measure a cube through a mask and dispersion");
  c_sim->add_option("--cube", sim.cube)->required();
  c_sim->add_option("--mask", sim.mask, "Cropped top-left to the cube size")->required();
  c_sim->add_option("--step", sim.step, "Dispersion step in pixels per band")->capture_default_str();
  c_sim->add_option("--noise", sim.noise, "none | gaussian:SIGMA | shot:BITS")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  c_sim->add_option("--out", sim.out)->required();

  ShiftBackArgs sb;
  auto* c_sb = app.add_subcommand("shift-back", "Undo the dispersion shift of a measurement");
  c_sb->add_option("--measurement", sb.measurement)->required();
  c_sb->add_option("--bands", sb.bands)->required();
  c_sb->add_option("--step", sb.step)->capture_default_str();
  c_sb->add_flag("--scaled", sb.scaled, "Multiply by 2/N (the network's initial estimate)");
  c_sb->add_option("--out", sb.out)->required();

  GenDataArgs gd;
  auto* c_gd = app.add_subcommand("gen-data", "Write procedural synthetic scenes");
  c_gd->add_option("--count", gd.count)->capture_default_str();
  c_gd->add_option("--h", gd.h)->capture_default_str();
  c_gd->add_option("--w", gd.w)->capture_default_str();
  c_gd->add_option("--bands", gd.bands)->capture_default_str();
  c_gd->add_option("--seed", gd.seed)->capture_default_str();
  c_gd->add_option("--out", gd.out, "Output directory")->required();

  IngestArgs ing;
  auto* c_ing = app.add_subcommand("ingest", "Import a cube and normalize it to [0, 1]");
  c_ing->add_option("--input", ing.input)->required();
  c_ing->add_option("--format", ing.format, "hsc | raw")->capture_default_str();
  c_ing->add_option("--h", ing.h, "Rows (raw only)");
  c_ing->add_option("--w", ing.w, "Columns (raw only)");
  c_ing->add_option("--bands", ing.bands, "Bands (raw only)");
  c_ing->add_option("--out", ing.out)->required();

  InitArgs in;
  auto* c_init = app.add_subcommand("init", "Write a freshly initialized checkpoint");
  c_init->add_option("--config", in.config)->required();
  c_init->add_option("--seed", in.seed, "Overrides [model] seed");
  c_init->add_option("--out", in.out, "Checkpoint stem")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a directory of scenes");
  c_train->add_option("--config", tr.config)->required();
  c_train->add_option("--data", tr.data, "Directory of HSC scenes")->required();
  c_train->add_option("--mask", tr.mask)->required();
  c_train->add_option("--out", tr.out, "Run directory")->required();
  c_train->add_option("--resume", tr.resume, "Run directory to continue from");
  c_train->add_option("--seed", tr.seed, "Overrides [train] seed");
  c_train->add_option("--max-steps", tr.max_steps, "Overrides [train] max_steps");
  c_train->add_flag("--quiet", tr.quiet);

  ReconstructArgs rc;
  auto* c_rec = app.add_subcommand("reconstruct", "Reconstruct a cube from a measurement");
  c_rec->add_option("--ckpt", rc.ckpt)->required();
  c_rec->add_option("--measurement", rc.measurement)->required();
  c_rec->add_option("--mask", rc.mask)->required();
  c_rec->add_option("--out", rc.out)->required();

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score checkpoints on a scene directory");
  c_eval->add_option("--ckpt", ev.ckpts, "Repeat for an LCS kernel ablation")->required();
  c_eval->add_option("--scenes", ev.scenes)->required();
  c_eval->add_option("--mask", ev.mask)->required();
  c_eval->add_option("--out", ev.out, "Report directory")->required();
  c_eval->add_option("--seed", ev.seed, "Measurement noise seed")->capture_default_str();
  c_eval->add_option("--psnr", ev.psnr_mode, "per-band | whole-cube")->capture_default_str();
  c_eval->add_flag("--baseline", ev.baseline, "Also score the shift-back baseline");
  c_eval->add_option("--spectral-region", ev.spectral_region, "y,x,h,w region for spectral curves")
      ->delimiter(',');

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  c_gc->add_option("--module", gc.modules, "Case name (repeatable); default all");
  c_gc->add_option("--seeds", gc.seeds)->capture_default_str();
  c_gc->add_option("--coords", gc.coords, "Probed coordinates per tensor")->capture_default_str();
  c_gc->add_option("--seed", gc.seed)->capture_default_str();

  CountArgs ct;
  auto* c_count = app.add_subcommand("count", "Parameter and FLOP accounting");
  c_count->add_option("--config", ct.config);
  c_count->add_option("--variant", ct.variant, "S | M | L | tiny");
  c_count->add_option("--h", ct.h)->capture_default_str();
  c_count->add_option("--w", ct.w)->capture_default_str();
  c_count->add_option("--bands", ct.bands, "Overrides the model's band count");
  c_count->add_flag("--breakdown", ct.breakdown, "Per top-level component");
  c_count->add_flag("--ablation", ct.ablation, "DCB-only vs DCB+CFSAB parameter delta");
  c_count->add_flag("--json", ct.json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*c_mask) gen_mask(gm, args);
    else if (*c_sim) simulate_cmd(sim, args);
    else if (*c_sb) shift_back_cmd(sb, args);
    else if (*c_gd) gen_data(gd, args);
    else if (*c_ing) ingest(ing, args);
    else if (*c_init) init_model(in, args);
    else if (*c_train) train_cmd(tr, args);
    else if (*c_rec) reconstruct_cmd(rc, args);
    else if (*c_eval) evaluate_cmd(ev, args);
    else if (*c_gc) {
      if (!gradcheck_cmd(gc)) return fail("gradcheck-failed", "relative error above tolerance", 7);
    } else if (*c_count) count_cmd(ct);
  } catch (const cfsdcn::TrainingDiverged& e) {
    return fail("diverged", std::string(e.what()) + " (dump: " + e.dump().string() + ")", 6);
  } catch (const cfsdcn::ConfigError& e) {
    return fail("config", e.what(), 5);
  } catch (const cfsdcn::FormatError& e) {
    return fail("format", e.what(), 3);
  } catch (const cfsdcn::ShapeError& e) {
    return fail("shape", e.what(), 4);
  } catch (const std::invalid_argument& e) {
    return fail("invalid-argument", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
