#include <lasers/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  bool reproducible = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", args.seed, "random seed (overrides config)")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--threads", args.threads, "worker threads for per-column coding")
      ->capture_default_str();
  cmd->add_flag("--reproducible", args.reproducible, "suppress timestamps in outputs");
  cmd->add_option("--set", args.overrides, "override a config key (key=value, repeatable)");
}

int build_config(const CommonArgs& args, lasers::cli::ExpConfig& cfg,
                 lasers::cli::RunOptions& opt) {
  try {
    if (!args.config_path.empty()) cfg = lasers::cli::load_config(args.config_path);
    for (const auto& kv : args.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw lasers::ConfigError("--set expects key=value: " + kv);
      lasers::cli::set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed_set) cfg.train.seed = args.seed;
    if (args.threads < 1) throw lasers::ConfigError("--threads must be >= 1");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lasers::cli::kExitConfig;
  }
  opt.out_dir = args.out_dir;
  opt.threads = args.threads;
  opt.reproducible = args.reproducible;
  return lasers::cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent-space compression bottlenecks: vector quantization vs "
               "sparse dictionary learning"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, compare_args, ablate_args, mask_args;
  auto* train = app.add_subcommand("train", "train one model, write metrics/checkpoint/curves");
  add_common(train, train_args);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured data");
  add_common(eval, eval_args);
  auto* compare = app.add_subcommand("compare", "paired VQ vs DL training on identical data");
  add_common(compare, compare_args);
  auto* ablate = app.add_subcommand("ablate-sparsity", "DL runs over a list of sparsity levels");
  add_common(ablate, ablate_args);
  auto* mask = app.add_subcommand("mask-eval", "center-mask inpainting evaluation");
  add_common(mask, mask_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? lasers::cli::kExitOk : lasers::cli::kExitConfig;
  }

  auto dispatch = [](CommonArgs& args,
                     int (*cmd)(const lasers::cli::ExpConfig&, const lasers::cli::RunOptions&)) {
    lasers::cli::ExpConfig cfg;
    lasers::cli::RunOptions opt;
    const int rc = build_config(args, cfg, opt);
    if (rc != lasers::cli::kExitOk) return rc;
    return cmd(cfg, opt);
  };

  if (train->parsed()) return dispatch(train_args, lasers::cli::cmd_train);
  if (eval->parsed()) return dispatch(eval_args, lasers::cli::cmd_eval);
  if (compare->parsed()) return dispatch(compare_args, lasers::cli::cmd_compare);
  if (ablate->parsed()) return dispatch(ablate_args, lasers::cli::cmd_ablate_sparsity);
  if (mask->parsed()) return dispatch(mask_args, lasers::cli::cmd_mask_eval);
  return lasers::cli::kExitConfig;
}
