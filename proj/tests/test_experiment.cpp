#include <lasers/experiment.hpp>

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lasers;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lasers_cli_" + std::to_string(std::uintptr_t(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

cli::ExpConfig tiny_planted_config() {
  cli::ExpConfig cfg;
  cli::set_key(cfg, "data", "planted");
  cli::set_key(cfg, "k", "16");
  cli::set_key(cfg, "l", "8");
  cli::set_key(cfg, "s", "2");
  cli::set_key(cfg, "s_star", "2");
  cli::set_key(cfg, "n_patches", "16");
  cli::set_key(cfg, "epochs", "1");
  cli::set_key(cfg, "batch_size", "8");
  cli::set_key(cfg, "seed", "5");
  return cfg;
}

}  // namespace

TEST_CASE("config files parse and reject unknown keys") {
  TempDir tmp;
  {
    std::ofstream out(tmp.path / "run.cfg");
    out << "# comment line\n"
        << "kind = vq\n"
        << "k=32\n"
        << "  epochs = 3  \n"
        << "\n"
        << "s_list = 1, 2,4\n";
  }
  const cli::ExpConfig cfg = cli::load_config((tmp.path / "run.cfg").string());
  CHECK(cfg.train.kind == BottleneckKind::VQ);
  CHECK(cfg.train.k == 32);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.s_list == std::vector<int>{1, 2, 4});

  cli::ExpConfig scratch;
  CHECK_THROWS_AS(cli::set_key(scratch, "nope", "1"), ConfigError);
  CHECK_THROWS_AS(cli::set_key(scratch, "k", "abc"), ConfigError);
  CHECK_THROWS_AS(cli::set_key(scratch, "kind", "wavelets"), ConfigError);
  {
    std::ofstream out(tmp.path / "bad.cfg");
    out << "this line has no equals\n";
  }
  CHECK_THROWS_AS(cli::load_config((tmp.path / "bad.cfg").string()), ConfigError);
}

TEST_CASE("one-epoch training emits a header plus one csv row") {
  TempDir tmp;
  cli::ExpConfig cfg = tiny_planted_config();
  cli::RunOptions opt;
  opt.out_dir = tmp.str();
  opt.reproducible = true;
  REQUIRE(cli::cmd_train(cfg, opt) == cli::kExitOk);

  const std::string csv = slurp(tmp.path / "metrics.csv");
  std::istringstream lines(csv);
  std::string line;
  int count = 0;
  std::getline(lines, line);
  CHECK(line == "epoch,mse,psnr,perplexity,utilization,codebook_term,commitment_term");
  while (std::getline(lines, line))
    if (!line.empty()) ++count;
  CHECK(count == 1);

  CHECK(fs::exists(tmp.path / "checkpoint.lsrs"));
  CHECK(fs::exists(tmp.path / "curves.svg"));
  CHECK(fs::exists(tmp.path / "manifest.json"));
}

TEST_CASE("training twice with one seed is byte-identical") {
  TempDir a, b;
  cli::ExpConfig cfg = tiny_planted_config();
  cli::set_key(cfg, "epochs", "3");
  cli::RunOptions opt_a{a.str(), 1, true};
  cli::RunOptions opt_b{b.str(), 1, true};
  REQUIRE(cli::cmd_train(cfg, opt_a) == cli::kExitOk);
  REQUIRE(cli::cmd_train(cfg, opt_b) == cli::kExitOk);
  CHECK(slurp(a.path / "metrics.csv") == slurp(b.path / "metrics.csv"));
  CHECK(slurp(a.path / "checkpoint.lsrs") == slurp(b.path / "checkpoint.lsrs"));
  CHECK(slurp(a.path / "manifest.json") == slurp(b.path / "manifest.json"));
  CHECK(slurp(a.path / "curves.svg") == slurp(b.path / "curves.svg"));
}

TEST_CASE("eval replays a checkpoint and matches the training configuration") {
  TempDir train_dir, eval_dir;
  cli::ExpConfig cfg = tiny_planted_config();
  cli::set_key(cfg, "epochs", "2");
  cli::RunOptions opt{train_dir.str(), 1, true};
  REQUIRE(cli::cmd_train(cfg, opt) == cli::kExitOk);

  cli::ExpConfig eval_cfg = cfg;
  cli::set_key(eval_cfg, "checkpoint", (train_dir.path / "checkpoint.lsrs").string());
  cli::RunOptions eval_opt{eval_dir.str(), 1, true};
  REQUIRE(cli::cmd_eval(eval_cfg, eval_opt) == cli::kExitOk);
  const std::string summary = slurp(eval_dir.path / "summary.json");
  CHECK(summary.find("\"mse\"") != std::string::npos);
  CHECK(summary.find("\"perplexity\"") != std::string::npos);

  cli::ExpConfig missing = cfg;
  CHECK(cli::cmd_eval(missing, eval_opt) == cli::kExitConfig);
}

TEST_CASE("compare runs both bottlenecks on identical data") {
  TempDir tmp;
  cli::ExpConfig cfg;
  cli::set_key(cfg, "data", "synthetic");
  cli::set_key(cfg, "n_images", "4");
  cli::set_key(cfg, "image_size", "16");
  cli::set_key(cfg, "patch", "4");
  cli::set_key(cfg, "n_patches", "64");
  cli::set_key(cfg, "k", "16");
  cli::set_key(cfg, "s", "2");
  cli::set_key(cfg, "epochs", "2");
  cli::set_key(cfg, "batch_size", "32");
  cli::RunOptions opt{tmp.str(), 1, true};
  REQUIRE(cli::cmd_compare(cfg, opt) == cli::kExitOk);

  const std::string csv = slurp(tmp.path / "compare.csv");
  CHECK(csv.find("vq_mse") != std::string::npos);
  CHECK(csv.find("dl_mse") != std::string::npos);
  CHECK(fs::exists(tmp.path / "summary.json"));
  CHECK(fs::exists(tmp.path / "vq_ze.pgm"));
  CHECK(fs::exists(tmp.path / "vq_zhat.pgm"));
  CHECK(fs::exists(tmp.path / "dl_ze.pgm"));
  CHECK(fs::exists(tmp.path / "dl_zhat.pgm"));

  // First-epoch reconstruction quality starts from the same data and init.
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(!row.empty());
}

TEST_CASE("compare on exactly representable data separates the bottlenecks") {
  TempDir tmp;
  cli::ExpConfig cfg;
  cli::set_key(cfg, "data", "planted");
  cli::set_key(cfg, "k", "24");
  cli::set_key(cfg, "l", "8");
  cli::set_key(cfg, "s", "4");
  cli::set_key(cfg, "s_star", "2");
  cli::set_key(cfg, "n_patches", "64");
  cli::set_key(cfg, "epochs", "200");
  cli::set_key(cfg, "batch_size", "32");
  cli::set_key(cfg, "lr", "3e-2");
  cli::set_key(cfg, "seed", "5");
  cli::RunOptions opt{tmp.str(), 1, true};
  REQUIRE(cli::cmd_compare(cfg, opt) == cli::kExitOk);

  const nlohmann::json summary = nlohmann::json::parse(slurp(tmp.path / "summary.json"));
  const double dl_mse = summary["dl"]["mse"].get<double>();
  const double vq_mse = summary["vq"]["mse"].get<double>();
  // Sparse combinations fit the planted model almost exactly; one codeword
  // per signal cannot, so the quantizer error reflects the cluster spread.
  CHECK(dl_mse < 1e-3);
  CHECK(vq_mse > 10.0 * dl_mse);
  CHECK(summary["latent_mse_ratio"].get<double>() < 0.1);
}

TEST_CASE("sparsity ablation emits one row per level") {
  TempDir tmp;
  cli::ExpConfig cfg = tiny_planted_config();
  cli::set_key(cfg, "s_list", "1");
  cli::RunOptions opt{tmp.str(), 1, true};
  REQUIRE(cli::cmd_ablate_sparsity(cfg, opt) == cli::kExitOk);
  const std::string csv = slurp(tmp.path / "ablation.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "s,psnr,perplexity");
  int rows = 0;
  while (std::getline(lines, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1);
}

TEST_CASE("mask evaluation at fraction zero equals the plain evaluation") {
  TempDir train_dir, mask_dir, eval_dir;
  cli::ExpConfig cfg;
  cli::set_key(cfg, "data", "synthetic");
  cli::set_key(cfg, "n_images", "4");
  cli::set_key(cfg, "image_size", "16");
  cli::set_key(cfg, "patch", "4");
  cli::set_key(cfg, "n_patches", "48");
  cli::set_key(cfg, "k", "12");
  cli::set_key(cfg, "s", "2");
  cli::set_key(cfg, "epochs", "2");
  cli::RunOptions opt{train_dir.str(), 1, true};
  REQUIRE(cli::cmd_train(cfg, opt) == cli::kExitOk);

  cli::ExpConfig mask_cfg = cfg;
  cli::set_key(mask_cfg, "checkpoint", (train_dir.path / "checkpoint.lsrs").string());
  cli::set_key(mask_cfg, "mask_fraction", "0");
  cli::RunOptions mask_opt{mask_dir.str(), 1, true};
  REQUIRE(cli::cmd_mask_eval(mask_cfg, mask_opt) == cli::kExitOk);

  cli::RunOptions eval_opt{eval_dir.str(), 1, true};
  REQUIRE(cli::cmd_eval(mask_cfg, eval_opt) == cli::kExitOk);

  // full_mse under an empty mask equals the plain eval mse
  const std::string mask_summary = slurp(mask_dir.path / "summary.json");
  const std::string eval_summary = slurp(eval_dir.path / "summary.json");
  auto extract = [](const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    REQUIRE(pos != std::string::npos);
    const auto colon = text.find(':', pos);
    return std::stod(text.substr(colon + 1));
  };
  CHECK(extract(mask_summary, "full_mse") ==
        doctest::Approx(extract(eval_summary, "mse")).epsilon(1e-12));
  CHECK(extract(mask_summary, "masked_pixels") == 0.0);
}

TEST_CASE("mask evaluation at fraction one blanks every patch and stays finite") {
  TempDir tmp;
  cli::ExpConfig cfg;
  cli::set_key(cfg, "data", "synthetic");
  cli::set_key(cfg, "n_images", "3");
  cli::set_key(cfg, "image_size", "16");
  cli::set_key(cfg, "patch", "4");
  cli::set_key(cfg, "n_patches", "32");
  cli::set_key(cfg, "k", "8");
  cli::set_key(cfg, "s", "2");
  cli::set_key(cfg, "epochs", "1");
  cli::set_key(cfg, "mask_fraction", "1");
  cli::RunOptions opt{tmp.str(), 1, true};
  REQUIRE(cli::cmd_mask_eval(cfg, opt) == cli::kExitOk);
  const std::string summary = slurp(tmp.path / "summary.json");
  CHECK(summary.find("\"masked_pixels\": 16") != std::string::npos);
  CHECK(summary.find("nan") == std::string::npos);
}

TEST_CASE("manifest references every emitted artifact") {
  TempDir tmp;
  cli::ExpConfig cfg = tiny_planted_config();
  cli::RunOptions opt{tmp.str(), 1, true};
  REQUIRE(cli::cmd_train(cfg, opt) == cli::kExitOk);
  const std::string manifest = slurp(tmp.path / "manifest.json");
  for (const auto& entry : fs::directory_iterator(tmp.path)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    CHECK(manifest.find("\"" + name + "\"") != std::string::npos);
  }
  CHECK(manifest.find("input_hash") != std::string::npos);
  CHECK(manifest.find("\"start_time\": \"\"") != std::string::npos);
}

TEST_CASE("divergent data maps to the numerical-failure exit code") {
  TempDir tmp;
  cli::ExpConfig cfg = tiny_planted_config();
  cli::set_key(cfg, "lr", "0");  // invalid per validation -> config error
  cli::RunOptions opt{tmp.str(), 1, true};
  CHECK(cli::cmd_train(cfg, opt) == cli::kExitConfig);

  cli::ExpConfig missing_dir;
  cli::set_key(missing_dir, "data", "/nonexistent/dir");
  CHECK(cli::cmd_train(missing_dir, opt) == cli::kExitData);
}
