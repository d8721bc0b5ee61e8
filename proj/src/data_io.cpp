#include <lasers/data_io.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace lasers {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Planted sparse model
// ---------------------------------------------------------------------------

std::pair<Dataset, SparseCode> generate_planted(const PlantedModel& model, int n,
                                                std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate_planted: n must be >= 1");
  const Dictionary& d = model.true_dictionary;
  if (model.s_star < 0 || model.s_star > std::min(d.k, d.l))
    throw ConfigError("generate_planted: need 0 <= s_star <= min(K, L)");

  Rng rng(seed);
  Dataset ds;
  ds.samples = SignalMatrix::Zero(d.l, n);
  ds.meta.source = "planted";
  ds.meta.split_seed = seed;

  SparseCode truth;
  truth.k = d.k;
  truth.columns.resize(std::size_t(n));

  std::vector<int> pool(std::size_t(d.k));
  for (int j = 0; j < d.k; ++j) pool[std::size_t(j)] = j;

  for (int i = 0; i < n; ++i) {
    auto& col = truth.columns[std::size_t(i)];
    for (int t = 0; t < model.s_star; ++t) {
      const int pick = t + int(rng.bounded(std::uint64_t(d.k - t)));
      std::swap(pool[std::size_t(t)], pool[std::size_t(pick)]);
      const double mag = rng.uniform(model.coeff_min, 1.0);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      col.support.push_back(pool[std::size_t(t)]);
      col.coeffs.push_back(sign * mag);
      ds.samples.col(i) += col.coeffs.back() * d.atoms.row(col.support.back()).transpose();
    }
    if (model.noise_sigma > 0.0)
      for (int c = 0; c < d.l; ++c) ds.samples(c, i) += model.noise_sigma * rng.normal();
  }
  return {std::move(ds), std::move(truth)};
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

namespace {

int pgm_next_int(std::istream& in) {
  // Skips whitespace and '#' comment lines between header tokens.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw DataError("pgm: truncated header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw DataError("pgm: malformed header");
  return value;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("pgm: cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') throw DataError("pgm: not a binary P5 file: " + path);
  const int width = pgm_next_int(in);
  const int height = pgm_next_int(in);
  const int maxval = pgm_next_int(in);
  if (width < 1 || height < 1) throw DataError("pgm: bad dimensions in " + path);
  if (maxval != 255) throw DataError("pgm: only 8-bit maxval 255 supported: " + path);

  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(std::size_t(width) * height);
  std::vector<unsigned char> raw(img.pixels.size());
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (std::size_t(in.gcount()) != raw.size()) throw DataError("pgm: truncated pixel data: " + path);
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = double(raw[i]) / 255.0;
  return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pgm: cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
}

void write_pgm(const std::string& path, const Matrix& pixels) {
  GrayImage img;
  img.height = int(pixels.rows());
  img.width = int(pixels.cols());
  img.pixels.resize(std::size_t(img.width) * img.height);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j) img.at(i, j) = pixels(i, j);
  write_pgm(path, img);
}

// ---------------------------------------------------------------------------
// Patch extraction
// ---------------------------------------------------------------------------

Dataset patches_from_images(const std::vector<GrayImage>& images, int patch, int max_patches,
                            std::uint64_t seed) {
  if (patch < 1) throw ConfigError("patches: patch size must be >= 1");
  if (max_patches < 1) throw ConfigError("patches: max_patches must be >= 1");
  std::vector<int> usable;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (images[i].width >= patch && images[i].height >= patch) usable.push_back(int(i));
  if (usable.empty()) throw DataError("patches: no image large enough for requested patch size");

  Rng rng(seed);
  Dataset ds;
  ds.samples = SignalMatrix(patch * patch, max_patches);
  ds.meta.patch = patch;
  ds.meta.split_seed = seed;
  for (int p = 0; p < max_patches; ++p) {
    const GrayImage& img = images[std::size_t(usable[rng.bounded(usable.size())])];
    const int top = int(rng.bounded(std::uint64_t(img.height - patch + 1)));
    const int left = int(rng.bounded(std::uint64_t(img.width - patch + 1)));
    for (int r = 0; r < patch; ++r)
      for (int c = 0; c < patch; ++c)
        ds.samples(r * patch + c, p) = img.at(top + r, left + c);
  }
  return ds;
}

Dataset load_images(const std::string& dir_path, int patch, int max_patches,
                    std::uint64_t seed) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_path, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  }
  if (ec) throw DataError("load_images: cannot read directory " + dir_path);
  std::sort(files.begin(), files.end());

  std::vector<GrayImage> images;
  for (const auto& f : files) {
    try {
      images.push_back(read_pgm(f.string()));
    } catch (const DataError& e) {
      std::cerr << "warning: skipping " << f.string() << ": " << e.what() << "\n";
    }
  }
  if (images.empty()) throw DataError("load_images: no decodable images in " + dir_path);
  Dataset ds = patches_from_images(images, patch, max_patches, seed);
  ds.meta.source = dir_path;
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic images
// ---------------------------------------------------------------------------

std::vector<GrayImage> synthetic_images(int count, int size, std::uint64_t seed) {
  if (count < 1 || size < 1) throw ConfigError("synthetic_images: count and size must be >= 1");
  Rng rng(seed);
  std::vector<GrayImage> images{static_cast<std::size_t>(count), GrayImage{}};
  for (auto& img : images) {
    img.width = img.height = size;
    img.pixels.assign(std::size_t(size) * size, 0.0);
    const int family = int(rng.bounded(4));
    const double theta = rng.uniform(0.0, M_PI);
    const double cs = std::cos(theta), sn = std::sin(theta);
    switch (family) {
      case 0: {  // oriented linear gradient
        const double base = rng.uniform(0.1, 0.5);
        const double slope = rng.uniform(0.3, 0.9);
        for (int i = 0; i < size; ++i)
          for (int j = 0; j < size; ++j)
            img.at(i, j) = base + slope * (cs * i + sn * j) / double(size);
        break;
      }
      case 1: {  // gaussian blobs
        const int blobs = 1 + int(rng.bounded(3));
        for (int b = 0; b < blobs; ++b) {
          const double ci = rng.uniform(0.0, double(size));
          const double cj = rng.uniform(0.0, double(size));
          const double sigma = rng.uniform(0.08, 0.35) * size;
          const double amp = rng.uniform(0.35, 0.9);
          for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) {
              const double di = i - ci, dj = j - cj;
              img.at(i, j) += amp * std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            }
        }
        break;
      }
      case 2: {  // sinusoidal grating
        const double freq = rng.uniform(1.0, 6.0);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amp = rng.uniform(0.25, 0.5);
        for (int i = 0; i < size; ++i)
          for (int j = 0; j < size; ++j)
            img.at(i, j) =
                0.5 + amp * std::sin(2.0 * M_PI * freq * (cs * i + sn * j) / size + phase);
        break;
      }
      default: {  // step edge between two shades
        const double offset = rng.uniform(0.25, 0.75) * size;
        const double lo = rng.uniform(0.05, 0.4), hi = rng.uniform(0.6, 0.95);
        for (int i = 0; i < size; ++i)
          for (int j = 0; j < size; ++j)
            img.at(i, j) = (cs * i + sn * j < offset) ? lo : hi;
        break;
      }
    }
    for (auto& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
  }
  return images;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'L', 'S', 'R', 'S'};
constexpr unsigned char kVersion = 0x01;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, double v) {
  float f = float(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

void put_matrix(std::ostream& out, const Matrix& m) {  // row-major
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f32(out, m(i, j));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw CheckpointError("checkpoint: truncated file");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

double get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return double(f);
}

Matrix get_matrix(std::istream& in, int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = get_f32(in);
  return m;
}

unsigned char get_u8(std::istream& in) {
  const int c = in.get();
  if (c == EOF) throw CheckpointError("checkpoint: truncated file");
  return static_cast<unsigned char>(c);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path);
  out.write(kMagic, 4);
  out.put(char(kVersion));
  put_u32(out, std::uint32_t(ckpt.dictionary.k));
  put_u32(out, std::uint32_t(ckpt.dictionary.l));
  put_matrix(out, ckpt.dictionary.atoms);

  out.put(ckpt.ema ? 1 : 0);
  if (ckpt.ema) {
    if (ckpt.ema->counts.size() != ckpt.dictionary.k ||
        ckpt.ema->sums.rows() != ckpt.dictionary.k || ckpt.ema->sums.cols() != ckpt.dictionary.l)
      throw DimensionError("checkpoint: EMA state shape mismatch");
    for (int j = 0; j < ckpt.dictionary.k; ++j) put_f32(out, ckpt.ema->counts[j]);
    put_matrix(out, ckpt.ema->sums);
  }

  const bool has_affine = ckpt.coder && ckpt.coder->mode == CoderMode::Affine;
  out.put(has_affine ? 1 : 0);
  if (has_affine) {
    const AffineCoder& c = *ckpt.coder;
    put_u32(out, std::uint32_t(c.enc_w.cols()));  // input dim M
    put_u32(out, std::uint32_t(c.enc_w.rows()));  // latent dim
    put_matrix(out, c.enc_w);
    put_matrix(out, c.enc_b);
    put_matrix(out, c.dec_w);
    put_matrix(out, c.dec_b);
  }
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("checkpoint: bad magic in " + path);
  const unsigned char version = get_u8(in);
  if (version != kVersion) throw CheckpointError("checkpoint: unsupported version");

  Checkpoint ckpt;
  const int k = int(get_u32(in));
  const int l = int(get_u32(in));
  if (k < 1 || l < 1) throw CheckpointError("checkpoint: bad dimensions");
  ckpt.dictionary = Dictionary(k, l);
  ckpt.dictionary.atoms = get_matrix(in, k, l);

  if (get_u8(in) != 0) {
    EmaSnapshot ema;
    ema.counts = Vector(k);
    for (int j = 0; j < k; ++j) ema.counts[j] = get_f32(in);
    ema.sums = get_matrix(in, k, l);
    ckpt.ema = std::move(ema);
  }
  if (get_u8(in) != 0) {
    AffineCoder c;
    c.mode = CoderMode::Affine;
    const int m = int(get_u32(in));
    const int lat = int(get_u32(in));
    if (m < 1 || lat < 1) throw CheckpointError("checkpoint: bad coder dimensions");
    c.enc_w = get_matrix(in, lat, m);
    c.enc_b = get_matrix(in, lat, 1);
    c.dec_w = get_matrix(in, m, lat);
    c.dec_b = get_matrix(in, m, 1);
    ckpt.coder = std::move(c);
  }
  return ckpt;
}

}  // namespace lasers
