// Command-line front end. Configuration precedence: flags > --config file >
// built-in defaults.
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zcap/cli.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value pairs
  std::string data_dir, checkpoint_dir, output_dir, domain;
  uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_file, "key=value configuration file");
  cmd->add_option("--set", args.overrides, "explicit key=value override (repeatable)");
  cmd->add_option("--data-dir", args.data_dir, "dataset directory");
  cmd->add_option("--checkpoint-dir", args.checkpoint_dir, "checkpoint directory");
  cmd->add_option("--output-dir", args.output_dir, "output directory");
  cmd->add_option("--domain-id", args.domain, "micro-world domain id");
  cmd->add_option("--seed", args.seed, "global seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
}

zcap::RunConfig build_config(const CommonArgs& args) {
  zcap::RunConfig cfg;
  if (!args.config_file.empty()) cfg.apply_file(args.config_file);
  for (const auto& kv : args.overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got: " + kv);
    cfg.apply_pair(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!args.data_dir.empty()) cfg.data_dir = args.data_dir;
  if (!args.checkpoint_dir.empty()) cfg.checkpoint_dir = args.checkpoint_dir;
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (!args.domain.empty()) cfg.domain_id = args.domain;
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anchor-augmented zero-shot captioning on a synthetic micro-world"};
  app.require_subcommand(1);

  CommonArgs gen_args, enc_args, clm_args, cap_args, eval_args, abl_args, dyn_args, cf_args, gc_args;
  CommonArgs cd_a_args;

  auto* gen_cmd = app.add_subcommand("gen-data", "generate a micro-world dataset");
  add_common(gen_cmd, gen_args);

  auto* enc_cmd = app.add_subcommand("train-encoder", "train the dual encoder");
  add_common(enc_cmd, enc_args);

  auto* clm_cmd = app.add_subcommand("train-clm", "train the cross-modal language model");
  add_common(clm_cmd, clm_args);

  auto* cap_cmd = app.add_subcommand("caption", "caption a split's images");
  add_common(cap_cmd, cap_args);
  std::string cap_split = "test";
  bool cap_zero_prefix = false, cap_timing = false;
  cap_cmd->add_option("--split", cap_split, "train|validation|test");
  cap_cmd->add_flag("--zero-prefix", cap_zero_prefix, "ablation: zero the embedding prefix");
  cap_cmd->add_flag("--timing", cap_timing, "report per-image decode latency");

  auto* eval_cmd = app.add_subcommand("evaluate", "score a candidate caption file");
  add_common(eval_cmd, eval_args);
  std::string eval_candidates, eval_split = "test";
  eval_cmd->add_option("--candidates", eval_candidates, "captions (.txt lines or .jsonl)")->required();
  eval_cmd->add_option("--split", eval_split, "train|validation|test");

  auto* abl_cmd = app.add_subcommand("ablate", "p/q ablation sweep");
  add_common(abl_cmd, abl_args);
  std::vector<double> abl_p, abl_q;
  abl_cmd->add_option("--p", abl_p, "detector thresholds (default 0.5 0.7 0.9 1)");
  abl_cmd->add_option("--q", abl_q, "dropout probabilities (default 0 0.25 0.5 0.75 1)");

  auto* cd_cmd = app.add_subcommand("cross-domain", "evaluate two domains against each other");
  add_common(cd_cmd, cd_a_args);
  std::string cd_b_data, cd_b_ckpt, cd_b_domain = "reef";
  cd_cmd->add_option("--b-data-dir", cd_b_data, "second domain dataset directory")->required();
  cd_cmd->add_option("--b-checkpoint-dir", cd_b_ckpt, "second domain checkpoint directory")->required();
  cd_cmd->add_option("--b-domain-id", cd_b_domain, "second domain id");

  auto* dyn_cmd = app.add_subcommand("dynamics", "export per-epoch transfer curves");
  add_common(dyn_cmd, dyn_args);

  auto* cf_cmd = app.add_subcommand("counterfactual", "concept-shift probe");
  add_common(cf_cmd, cf_args);
  std::string cf_source, cf_target;
  double cf_scale = 1.0;
  size_t cf_images = 50;
  cf_cmd->add_option("--source", cf_source, "source phrase")->required();
  cf_cmd->add_option("--target", cf_target, "target phrase")->required();
  cf_cmd->add_option("--scale", cf_scale, "shift multiplier");
  cf_cmd->add_option("--images", cf_images, "number of test images");

  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(gc_cmd, gc_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) return zcap::cli::cmd_gen_data(build_config(gen_args));
    if (enc_cmd->parsed()) return zcap::cli::cmd_train_encoder(build_config(enc_args));
    if (clm_cmd->parsed()) return zcap::cli::cmd_train_clm(build_config(clm_args));
    if (cap_cmd->parsed())
      return zcap::cli::cmd_caption(build_config(cap_args), cap_split, cap_zero_prefix, cap_timing);
    if (eval_cmd->parsed())
      return zcap::cli::cmd_evaluate(build_config(eval_args), eval_candidates, eval_split);
    if (abl_cmd->parsed()) {
      zcap::cli::AblationGrid grid;
      if (!abl_p.empty()) grid.p_values = abl_p;
      if (!abl_q.empty()) grid.q_values = abl_q;
      return zcap::cli::cmd_ablate(build_config(abl_args), grid);
    }
    if (cd_cmd->parsed()) {
      zcap::RunConfig cfg_a = build_config(cd_a_args);
      zcap::RunConfig cfg_b = cfg_a;
      cfg_b.data_dir = cd_b_data;
      cfg_b.checkpoint_dir = cd_b_ckpt;
      cfg_b.domain_id = cd_b_domain;
      return zcap::cli::cmd_crossdomain(cfg_a, cfg_b);
    }
    if (dyn_cmd->parsed()) return zcap::cli::cmd_dynamics(build_config(dyn_args));
    if (cf_cmd->parsed())
      return zcap::cli::cmd_counterfactual(build_config(cf_args), cf_source, cf_target, cf_scale,
                                           cf_images);
    if (gc_cmd->parsed()) return zcap::cli::cmd_gradcheck(build_config(gc_args));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
