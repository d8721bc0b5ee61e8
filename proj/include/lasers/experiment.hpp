#ifndef LASERS_EXPERIMENT_HPP
#define LASERS_EXPERIMENT_HPP

#include <lasers/data_io.hpp>

#include <string>
#include <utility>
#include <vector>

namespace lasers::cli {

struct RunOptions {
  std::string out_dir = ".";
  int threads = 1;
  bool reproducible = false;
};

// Flat key=value experiment description; TrainConfig plus the data source
// and command-specific knobs. Flags override file values.
struct ExpConfig {
  TrainConfig train;
  std::string data = "synthetic";  // "synthetic" | "planted" | image directory
  int n_patches = 2000;
  int patch = 8;
  int image_size = 64;
  int n_images = 24;
  double noise_sigma = 0.0;
  int s_star = 3;
  double coeff_min = 0.5;
  std::string checkpoint;  // input checkpoint for eval / mask-eval
  double mask_fraction = 0.25;
  std::vector<int> s_list = {1, 2, 4, 8};
};

ExpConfig load_config(const std::string& path);
void set_key(ExpConfig& cfg, const std::string& key, const std::string& value);

// Canonical (key, value) snapshot in fixed order; feeds the manifest and the
// input hash.
std::vector<std::pair<std::string, std::string>> config_items(const ExpConfig& cfg);

Dataset build_dataset(const ExpConfig& cfg);

int cmd_train(const ExpConfig& cfg, const RunOptions& opt);
int cmd_eval(const ExpConfig& cfg, const RunOptions& opt);
int cmd_compare(const ExpConfig& cfg, const RunOptions& opt);
int cmd_ablate_sparsity(const ExpConfig& cfg, const RunOptions& opt);
int cmd_mask_eval(const ExpConfig& cfg, const RunOptions& opt);

// Exit codes: 0 ok, 1 usage/config, 2 data, 3 numerical divergence.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

}  // namespace lasers::cli

#endif
