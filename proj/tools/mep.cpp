// mep train | verify | plot

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "mep/commands.hpp"
#include "mep/config.hpp"

namespace fs = std::filesystem;

namespace {

fs::path output_root() {
  const char* env = std::getenv("MEP_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum entropy-regularized multi-goal RL"};
  app.require_subcommand(1);

  std::string config_path, env_name, method_name, seeds_spec = "1", out_dir;
  std::size_t epochs = 0, jobs = 1;
  auto* train = app.add_subcommand("train", "Train one configuration over several seeds");
  train->add_option("--config", config_path, "key: value config file")->check(CLI::ExistingFile);
  train->add_option("--env", env_name, "point_reach or drift_reach");
  train->add_option("--method", method_name, "ddpg, ddpg_her, ddpg_mep, ddpg_her_mep, ddpg_per, ddpg_her_per");
  train->add_option("--seeds", seeds_spec, "N for seeds 0..N-1, or a comma-separated list");
  train->add_option("--epochs", epochs, "override the epoch count");
  train->add_option("--out", out_dir, "output directory (default $MEP_OUT_DIR/<env>_<method>)");
  train->add_option("--jobs", jobs, "concurrent seed workers")->check(CLI::PositiveNumber);

  mep::VerifyOptions verify_opts;
  auto* verify = app.add_subcommand("verify", "Randomized checks of the entropy and bound theorems");
  verify->add_option("--n", verify_opts.instances, "instances per check")->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_opts.seed, "generator seed");

  std::vector<std::string> csvs;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Plot success and entropy curves from CSVs");
  plot->add_option("csvs", csvs, "per-epoch or aggregate CSV files")->required();
  plot->add_option("--out", plot_out, "output SVG (default $MEP_OUT_DIR/plot.svg)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      mep::ConfigOverrides overrides;
      if (!env_name.empty()) overrides["env"] = env_name;
      if (!method_name.empty()) overrides["method"] = method_name;
      if (epochs > 0) overrides["epochs"] = std::to_string(epochs);
      const mep::TrainConfig config = config_path.empty()
                                          ? mep::parse_config_text("", overrides)
                                          : mep::parse_config(config_path, overrides);
      const fs::path out = out_dir.empty()
                               ? output_root() / (config.env + "_" + mep::to_string(config.method))
                               : fs::path(out_dir);
      return mep::cmd_train(config, mep::parse_seeds(seeds_spec), out, jobs, std::cout);
    }
    if (*verify) return mep::cmd_verify(verify_opts, std::cout);
    if (*plot) {
      std::vector<fs::path> paths(csvs.begin(), csvs.end());
      const fs::path out = plot_out.empty() ? output_root() / "plot.svg" : fs::path(plot_out);
      const int rc = mep::cmd_plot(paths, out, std::cerr);
      if (rc == 0) std::cout << "wrote " << out.string() << '\n';
      return rc;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
