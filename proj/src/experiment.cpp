#include <lasers/experiment.hpp>
#include <lasers/metrics.hpp>

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace lasers::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void set_key(ExpConfig& cfg, const std::string& key, const std::string& value) {
  TrainConfig& t = cfg.train;
  if (key == "kind") {
    if (value == "identity") t.kind = BottleneckKind::Identity;
    else if (value == "vq") t.kind = BottleneckKind::VQ;
    else if (value == "dl") t.kind = BottleneckKind::DL;
    else throw ConfigError("config: kind must be identity|vq|dl");
  } else if (key == "k") t.k = parse_int(value, key);
  else if (key == "l") t.l = parse_int(value, key);
  else if (key == "s") t.s = parse_int(value, key);
  else if (key == "beta") t.beta = parse_double(value, key);
  else if (key == "eta") t.eta = parse_double(value, key);
  else if (key == "ema_decay") t.ema_decay = parse_double(value, key);
  else if (key == "ema_epsilon") t.ema_epsilon = parse_double(value, key);
  else if (key == "lr") t.lr = parse_double(value, key);
  else if (key == "epochs") t.epochs = parse_int(value, key);
  else if (key == "batch_size") t.batch_size = parse_int(value, key);
  else if (key == "seed") t.seed = std::uint64_t(std::stoull(value));
  else if (key == "update_rule") {
    if (value == "gradient") t.update_rule = UpdateRule::Gradient;
    else if (value == "bcd") t.update_rule = UpdateRule::BCD;
    else throw ConfigError("config: update_rule must be gradient|bcd");
  } else if (key == "coding_unit") {
    if (value == "fiber") t.geometry.unit = CodingUnit::Fiber;
    else if (value == "patch") t.geometry.unit = CodingUnit::Patch;
    else throw ConfigError("config: coding_unit must be fiber|patch");
  } else if (key == "patch_h") t.geometry.p_h = parse_int(value, key);
  else if (key == "patch_w") t.geometry.p_w = parse_int(value, key);
  else if (key == "reseed_threshold") t.reseed_threshold = parse_int(value, key);
  else if (key == "coder") {
    if (value == "raw") t.coder = CoderMode::RawPatch;
    else if (value == "affine") t.coder = CoderMode::Affine;
    else throw ConfigError("config: coder must be raw|affine");
  } else if (key == "init") {
    if (value == "sample") t.init = InitStrategy::DataSample;
    else if (value == "gaussian") t.init = InitStrategy::GaussianNormalized;
    else throw ConfigError("config: init must be sample|gaussian");
  } else if (key == "vq_codebook_grad") t.vq_codebook_grad = parse_bool(value, key);
  else if (key == "data") cfg.data = value;
  else if (key == "n_patches") cfg.n_patches = parse_int(value, key);
  else if (key == "patch") cfg.patch = parse_int(value, key);
  else if (key == "image_size") cfg.image_size = parse_int(value, key);
  else if (key == "n_images") cfg.n_images = parse_int(value, key);
  else if (key == "noise_sigma") cfg.noise_sigma = parse_double(value, key);
  else if (key == "s_star") cfg.s_star = parse_int(value, key);
  else if (key == "coeff_min") cfg.coeff_min = parse_double(value, key);
  else if (key == "checkpoint") cfg.checkpoint = value;
  else if (key == "mask_fraction") cfg.mask_fraction = parse_double(value, key);
  else if (key == "s_list") {
    cfg.s_list.clear();
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!trim(tok).empty()) cfg.s_list.push_back(parse_int(trim(tok), key));
    if (cfg.s_list.empty()) throw ConfigError("config: s_list must not be empty");
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

ExpConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  ExpConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
    set_key(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> config_items(const ExpConfig& cfg) {
  const TrainConfig& t = cfg.train;
  auto kind_name = [&] {
    switch (t.kind) {
      case BottleneckKind::Identity: return "identity";
      case BottleneckKind::VQ: return "vq";
      default: return "dl";
    }
  };
  std::vector<std::pair<std::string, std::string>> items;
  items.emplace_back("kind", kind_name());
  items.emplace_back("k", std::to_string(t.k));
  items.emplace_back("l", std::to_string(t.l));
  items.emplace_back("s", std::to_string(t.s));
  items.emplace_back("beta", fmt_double(t.beta));
  items.emplace_back("eta", fmt_double(t.eta));
  items.emplace_back("ema_decay", fmt_double(t.ema_decay));
  items.emplace_back("ema_epsilon", fmt_double(t.ema_epsilon));
  items.emplace_back("lr", fmt_double(t.lr));
  items.emplace_back("epochs", std::to_string(t.epochs));
  items.emplace_back("batch_size", std::to_string(t.batch_size));
  items.emplace_back("seed", std::to_string(t.seed));
  items.emplace_back("update_rule", t.update_rule == UpdateRule::BCD ? "bcd" : "gradient");
  items.emplace_back("coding_unit", t.geometry.unit == CodingUnit::Patch ? "patch" : "fiber");
  items.emplace_back("patch_h", std::to_string(t.geometry.p_h));
  items.emplace_back("patch_w", std::to_string(t.geometry.p_w));
  items.emplace_back("reseed_threshold", std::to_string(t.reseed_threshold));
  items.emplace_back("coder", t.coder == CoderMode::Affine ? "affine" : "raw");
  items.emplace_back("init", t.init == InitStrategy::DataSample ? "sample" : "gaussian");
  items.emplace_back("vq_codebook_grad", t.vq_codebook_grad ? "1" : "0");
  items.emplace_back("data", cfg.data);
  items.emplace_back("n_patches", std::to_string(cfg.n_patches));
  items.emplace_back("patch", std::to_string(cfg.patch));
  items.emplace_back("image_size", std::to_string(cfg.image_size));
  items.emplace_back("n_images", std::to_string(cfg.n_images));
  items.emplace_back("noise_sigma", fmt_double(cfg.noise_sigma));
  items.emplace_back("s_star", std::to_string(cfg.s_star));
  items.emplace_back("coeff_min", fmt_double(cfg.coeff_min));
  items.emplace_back("checkpoint", cfg.checkpoint);
  items.emplace_back("mask_fraction", fmt_double(cfg.mask_fraction));
  std::string s_list;
  for (std::size_t i = 0; i < cfg.s_list.size(); ++i) {
    if (i) s_list += ",";
    s_list += std::to_string(cfg.s_list[i]);
  }
  items.emplace_back("s_list", s_list);
  return items;
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

Dataset build_dataset(const ExpConfig& cfg) {
  const std::uint64_t data_seed = cfg.train.seed ^ 0xda7a5eedull;
  if (cfg.data == "synthetic") {
    const auto images = synthetic_images(cfg.n_images, cfg.image_size, data_seed);
    Dataset ds = patches_from_images(images, cfg.patch, cfg.n_patches, data_seed + 1);
    ds.meta.source = "synthetic";
    return ds;
  }
  if (cfg.data == "planted") {
    PlantedModel model;
    model.true_dictionary = init_dictionary(cfg.train.k, cfg.train.l,
                                            InitStrategy::GaussianNormalized, data_seed + 2);
    model.s_star = cfg.s_star;
    model.noise_sigma = cfg.noise_sigma;
    model.coeff_min = cfg.coeff_min;
    return generate_planted(model, cfg.n_patches, data_seed + 3).first;
  }
  return load_images(cfg.data, cfg.patch, cfg.n_patches, data_seed);
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

namespace {

std::string iso_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string input_hash(const ExpConfig& cfg, const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [key, value] : config_items(cfg)) {
    h = fnv1a(key.data(), key.size(), h);
    h = fnv1a(value.data(), value.size(), h);
  }
  h = fnv1a(ds.samples.data(), sizeof(double) * std::size_t(ds.samples.size()), h);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

json json_psnr(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

std::string metrics_csv(const std::vector<EpochMetrics>& series) {
  std::string csv = "epoch,mse,psnr,perplexity,utilization,codebook_term,commitment_term\n";
  for (const auto& em : series) {
    csv += std::to_string(em.epoch) + "," + fmt_double(em.mse) + "," + fmt_double(em.psnr) + "," +
           fmt_double(em.perplexity) + "," + fmt_double(em.utilization) + "," +
           fmt_double(em.codebook_term) + "," + fmt_double(em.commitment_term) + "\n";
  }
  return csv;
}

// Two stacked panels (PSNR, perplexity) versus epoch; raw polyline in light
// gray, Savitzky-Golay smoothed curve on top when the series is long enough.
std::string curves_svg(const std::vector<EpochMetrics>& series, bool reproducible) {
  constexpr int kW = 640, kPanelH = 220, kPad = 40;
  constexpr int kSgWindow = 9, kSgOrder = 2;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
      << (2 * kPanelH + 20) << "\">\n";
  if (!reproducible) svg << "<!-- generated " << iso_utc_now() << " -->\n";

  auto panel = [&](int top, const std::string& label, std::function<double(const EpochMetrics&)> get) {
    std::vector<double> ys;
    for (const auto& em : series) {
      double v = get(em);
      if (std::isinf(v)) v = 0.0;  // placeholder for perfect reconstructions
      ys.push_back(v);
    }
    double lo = ys.empty() ? 0.0 : ys[0], hi = lo;
    for (double v : ys) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1.0;
    const double x0 = kPad, x1 = kW - 10;
    const double y0 = top + kPanelH - 30, y1 = top + 15;
    auto px = [&](std::size_t i) {
      return ys.size() < 2 ? (x0 + x1) / 2
                           : x0 + (x1 - x0) * double(i) / double(ys.size() - 1);
    };
    auto py = [&](double v) { return y0 - (y0 - y1) * (v - lo) / (hi - lo); };

    svg << "<text x=\"" << x0 << "\" y=\"" << (top + 12) << "\" font-size=\"12\">" << label
        << "</text>\n";
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"2\" y=\"" << (y1 + 4) << "\" font-size=\"10\">" << fmt_double(hi)
        << "</text>\n";
    svg << "<text x=\"2\" y=\"" << y0 << "\" font-size=\"10\">" << fmt_double(lo) << "</text>\n";

    auto polyline = [&](const std::vector<double>& values, const std::string& stroke) {
      if (values.size() < 2) {
        if (!values.empty())
          svg << "<circle cx=\"" << px(0) << "\" cy=\"" << py(values[0])
              << "\" r=\"2\" fill=\"" << stroke << "\"/>\n";
        return;
      }
      svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" points=\"";
      for (std::size_t i = 0; i < values.size(); ++i)
        svg << fmt_double(px(i)) << "," << fmt_double(py(values[i])) << " ";
      svg << "\"/>\n";
    };
    polyline(ys, "#bbbbbb");
    if (int(ys.size()) >= kSgWindow) polyline(savitzky_golay(ys, kSgWindow, kSgOrder), "#2255aa");
  };

  panel(0, "PSNR (dB)", [](const EpochMetrics& em) { return em.psnr; });
  panel(kPanelH + 10, "perplexity", [](const EpochMetrics& em) { return em.perplexity; });
  svg << "</svg>\n";
  return svg.str();
}

Checkpoint make_checkpoint(const Trainer& trainer) {
  Checkpoint ckpt;
  const Bottleneck& bn = trainer.bottleneck();
  if (bn.kind == BottleneckKind::VQ) {
    ckpt.dictionary = bn.codebook.embedding;
    ckpt.ema = EmaSnapshot{bn.codebook.ema_counts, bn.codebook.ema_sums};
  } else if (bn.kind == BottleneckKind::DL) {
    ckpt.dictionary = bn.dictionary;
  }
  if (trainer.coder().mode == CoderMode::Affine) ckpt.coder = trainer.coder();
  return ckpt;
}

struct ManifestWriter {
  json manifest;
  fs::path dir;
  bool reproducible = false;

  ManifestWriter(const std::string& command, const ExpConfig& cfg, const Dataset& ds,
                 const RunOptions& opt)
      : dir(opt.out_dir), reproducible(opt.reproducible) {
    fs::create_directories(dir);
    manifest["command"] = command;
    json cfg_json = json::object();
    for (const auto& [key, value] : config_items(cfg)) cfg_json[key] = value;
    manifest["config"] = cfg_json;
    manifest["seed"] = cfg.train.seed;
    manifest["threads"] = opt.threads;
    manifest["input_hash"] = input_hash(cfg, ds);
    manifest["start_time"] = reproducible ? "" : iso_utc_now();
    manifest["outputs"] = json::array();
  }

  fs::path emit(const std::string& name, const std::string& contents) {
    const fs::path p = dir / name;
    write_text(p, contents);
    manifest["outputs"].push_back(name);
    return p;
  }

  void note_output(const std::string& name) { manifest["outputs"].push_back(name); }

  void finish() {
    manifest["end_time"] = reproducible ? "" : iso_utc_now();
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  }
};

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

json eval_json(const EvalMetrics& m) {
  json j;
  j["mse"] = m.mse;
  j["psnr"] = json_psnr(m.psnr);
  j["latent_mse"] = m.latent_mse;
  j["perplexity"] = m.perplexity;
  j["utilization"] = m.utilization;
  return j;
}

// Latent tensor with a meaningful spatial layout for the projection images.
// Image-backed data tiles the first image into its non-overlapping patch
// grid; planted data falls back to a square grid of dataset columns.
LatentTensor projection_latent(const ExpConfig& cfg, const Dataset& ds,
                               const AffineCoder& coder) {
  if (cfg.data == "planted") {
    const int grid = std::max(1, int(std::sqrt(double(std::min<std::int64_t>(
                                  ds.samples.cols(), 1024)))));
    SignalMatrix cols = ds.samples.leftCols(grid * grid);
    const SignalMatrix latents = encode(cols, coder);
    LatentTensor z(grid, grid, int(latents.rows()));
    std::memcpy(z.data.data(), latents.data(), sizeof(double) * z.size());
    return z;
  }

  GrayImage img;
  if (cfg.data == "synthetic") {
    img = synthetic_images(1, cfg.image_size, cfg.train.seed ^ 0xda7a5eedull)[0];
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cfg.data))
      if (entry.is_regular_file() && entry.path().extension() == ".pgm")
        files.push_back(entry.path());
    if (files.empty()) throw DataError("compare: no .pgm files in " + cfg.data);
    std::sort(files.begin(), files.end());
    img = read_pgm(files.front().string());
  }
  const int grid = std::max(1, std::min(img.height, img.width) / cfg.patch);
  SignalMatrix patches(cfg.patch * cfg.patch, grid * grid);
  for (int pi = 0; pi < grid; ++pi)
    for (int pj = 0; pj < grid; ++pj)
      for (int r = 0; r < cfg.patch; ++r)
        for (int c = 0; c < cfg.patch; ++c)
          patches(r * cfg.patch + c, pi * grid + pj) =
              img.at(pi * cfg.patch + r, pj * cfg.patch + c);
  const SignalMatrix latents = encode(patches, coder);
  LatentTensor z(grid, grid, int(latents.rows()));
  for (int pi = 0; pi < grid; ++pi)
    for (int pj = 0; pj < grid; ++pj)
      for (int c = 0; c < latents.rows(); ++c)
        z.at(pi, pj, c) = latents(c, pi * grid + pj);
  return z;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_train(const ExpConfig& cfg, const RunOptions& opt) {
  return guarded([&] {
    const Dataset ds = build_dataset(cfg);
    ManifestWriter mw("train", cfg, ds, opt);
    Trainer trainer(cfg.train, ds.samples, opt.threads);
    const std::vector<EpochMetrics> series = trainer.train(ds.samples);

    mw.emit("metrics.csv", metrics_csv(series));
    mw.emit("curves.svg", curves_svg(series, opt.reproducible));
    if (cfg.train.kind != BottleneckKind::Identity) {
      save_checkpoint((mw.dir / "checkpoint.lsrs").string(), make_checkpoint(trainer));
      mw.note_output("checkpoint.lsrs");
    }
    mw.finish();
  });
}

namespace {

// Rebuilds a model from a checkpoint for evaluation-only commands.
std::pair<AffineCoder, Bottleneck> restore_model(const ExpConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("eval: checkpoint=PATH is required");
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  AffineCoder coder = ckpt.coder ? *ckpt.coder : AffineCoder::raw_patch();
  Bottleneck bn;
  if (cfg.train.kind == BottleneckKind::VQ) {
    Codebook cb = Codebook::from_dictionary(ckpt.dictionary, cfg.train.ema_decay,
                                            cfg.train.ema_epsilon);
    if (ckpt.ema) {
      cb.ema_counts = ckpt.ema->counts;
      cb.ema_sums = ckpt.ema->sums;
    }
    bn = Bottleneck::vq(std::move(cb));
  } else if (cfg.train.kind == BottleneckKind::DL) {
    bn = Bottleneck::dl(ckpt.dictionary, cfg.train.s, cfg.train.geometry);
  } else {
    bn = Bottleneck::identity();
  }
  return {std::move(coder), std::move(bn)};
}

}  // namespace

int cmd_eval(const ExpConfig& cfg, const RunOptions& opt) {
  return guarded([&] {
    const Dataset ds = build_dataset(cfg);
    ManifestWriter mw("eval", cfg, ds, opt);
    auto [coder, bn] = restore_model(cfg);
    const EvalMetrics m = evaluate(ds.samples, coder, bn, opt.threads);
    json summary = eval_json(m);
    mw.emit("summary.json", summary.dump(2) + "\n");
    mw.finish();
  });
}

int cmd_compare(const ExpConfig& cfg, const RunOptions& opt) {
  return guarded([&] {
    const Dataset ds = build_dataset(cfg);
    ManifestWriter mw("compare", cfg, ds, opt);

    ExpConfig vq_cfg = cfg, dl_cfg = cfg;
    vq_cfg.train.kind = BottleneckKind::VQ;
    dl_cfg.train.kind = BottleneckKind::DL;

    Trainer vq_trainer(vq_cfg.train, ds.samples, opt.threads);
    const auto vq_series = vq_trainer.train(ds.samples);
    Trainer dl_trainer(dl_cfg.train, ds.samples, opt.threads);
    const auto dl_series = dl_trainer.train(ds.samples);

    std::string csv =
        "epoch,vq_mse,vq_psnr,vq_perplexity,vq_utilization,vq_codebook_term,vq_commitment_term,"
        "dl_mse,dl_psnr,dl_perplexity,dl_utilization,dl_codebook_term,dl_commitment_term\n";
    for (std::size_t i = 0; i < vq_series.size(); ++i) {
      const auto& v = vq_series[i];
      const auto& d = dl_series[i];
      csv += std::to_string(v.epoch) + "," + fmt_double(v.mse) + "," + fmt_double(v.psnr) + "," +
             fmt_double(v.perplexity) + "," + fmt_double(v.utilization) + "," +
             fmt_double(v.codebook_term) + "," + fmt_double(v.commitment_term) + "," +
             fmt_double(d.mse) + "," + fmt_double(d.psnr) + "," + fmt_double(d.perplexity) + "," +
             fmt_double(d.utilization) + "," + fmt_double(d.codebook_term) + "," +
             fmt_double(d.commitment_term) + "\n";
    }
    mw.emit("compare.csv", csv);

    const EvalMetrics vq_final = evaluate(ds.samples, vq_trainer.coder(), vq_trainer.bottleneck(),
                                          opt.threads);
    const EvalMetrics dl_final = evaluate(ds.samples, dl_trainer.coder(), dl_trainer.bottleneck(),
                                          opt.threads);
    json summary;
    summary["vq"] = eval_json(vq_final);
    summary["dl"] = eval_json(dl_final);
    summary["latent_mse_ratio"] =
        vq_final.latent_mse > 0 ? dl_final.latent_mse / vq_final.latent_mse : 0.0;
    summary["perplexity_pair"] = {vq_final.perplexity, dl_final.perplexity};
    mw.emit("summary.json", summary.dump(2) + "\n");

    // Top-singular-component maps of z_e and zhat_e for both bottlenecks.
    for (const auto& [name, trainer] :
         {std::pair<const char*, Trainer*>{"vq", &vq_trainer}, {"dl", &dl_trainer}}) {
      const LatentTensor z_e = projection_latent(cfg, ds, trainer->coder());
      const BottleneckOutput out = trainer->bottleneck().forward(z_e);
      write_pgm((mw.dir / (std::string(name) + "_ze.pgm")).string(),
                top_singular_projection(z_e));
      write_pgm((mw.dir / (std::string(name) + "_zhat.pgm")).string(),
                top_singular_projection(out.zhat));
      mw.note_output(std::string(name) + "_ze.pgm");
      mw.note_output(std::string(name) + "_zhat.pgm");
    }
    mw.finish();
  });
}

int cmd_ablate_sparsity(const ExpConfig& cfg, const RunOptions& opt) {
  return guarded([&] {
    const Dataset ds = build_dataset(cfg);
    ManifestWriter mw("ablate-sparsity", cfg, ds, opt);
    std::string csv = "s,psnr,perplexity\n";
    for (int s : cfg.s_list) {
      ExpConfig run_cfg = cfg;
      run_cfg.train.kind = BottleneckKind::DL;
      run_cfg.train.s = s;
      Trainer trainer(run_cfg.train, ds.samples, opt.threads);
      trainer.train(ds.samples);
      const EvalMetrics final =
          evaluate(ds.samples, trainer.coder(), trainer.bottleneck(), opt.threads);
      csv += std::to_string(s) + "," + fmt_double(final.psnr) + "," +
             fmt_double(final.perplexity) + "\n";
    }
    mw.emit("ablation.csv", csv);
    mw.finish();
  });
}

int cmd_mask_eval(const ExpConfig& cfg, const RunOptions& opt) {
  return guarded([&] {
    if (cfg.mask_fraction < 0.0 || cfg.mask_fraction > 1.0)
      throw ConfigError("mask-eval: mask_fraction must be in [0, 1]");
    const Dataset ds = build_dataset(cfg);
    ManifestWriter mw("mask-eval", cfg, ds, opt);

    AffineCoder coder;
    Bottleneck bn;
    if (!cfg.checkpoint.empty()) {
      std::tie(coder, bn) = restore_model(cfg);
    } else {
      Trainer trainer(cfg.train, ds.samples, opt.threads);
      trainer.train(ds.samples);
      coder = trainer.coder();
      bn = trainer.bottleneck();
    }

    const int dim = int(ds.samples.rows());
    const int side = int(std::lround(std::sqrt(double(dim))));
    if (side * side != dim)
      throw DataError("mask-eval: coding units are not square patches");
    const int mask_side = int(std::lround(cfg.mask_fraction * side));
    const int start = (side - mask_side) / 2;

    SignalMatrix masked = ds.samples;
    std::vector<int> masked_rows;
    for (int r = start; r < start + mask_side; ++r)
      for (int c = start; c < start + mask_side; ++c) masked_rows.push_back(r * side + c);
    for (int row : masked_rows) masked.row(row).setZero();

    bn.threads = opt.threads;
    const SignalMatrix z_e = encode(masked, coder);
    const BottleneckOutput out = bn.forward(tensor_from_columns(z_e));
    const SignalMatrix xhat = decode(columns_from_tensor(out.zhat), coder);

    const double full_mse = mse(ds.samples, xhat);
    double masked_mse = 0.0;
    if (!masked_rows.empty()) {
      double acc = 0.0;
      for (int row : masked_rows)
        acc += (ds.samples.row(row) - xhat.row(row)).squaredNorm();
      masked_mse = acc / (double(masked_rows.size()) * double(ds.samples.cols()));
    }

    json summary;
    summary["mask_fraction"] = cfg.mask_fraction;
    summary["mask_side"] = mask_side;
    summary["masked_pixels"] = int(masked_rows.size());
    summary["full_mse"] = full_mse;
    summary["full_psnr"] = json_psnr(psnr_from_mse(full_mse));
    summary["masked_mse"] = masked_mse;
    summary["masked_psnr"] =
        masked_rows.empty() ? json("undefined") : json_psnr(psnr_from_mse(masked_mse));
    mw.emit("summary.json", summary.dump(2) + "\n");
    mw.finish();
  });
}

}  // namespace lasers::cli
