#ifndef LASERS_DATA_IO_HPP
#define LASERS_DATA_IO_HPP

#include <lasers/autoencoder.hpp>
#include <lasers/sparse_coding.hpp>

#include <optional>
#include <string>
#include <utility>

namespace lasers {

struct DatasetMeta {
  std::string source;
  int patch = 0;
  std::uint64_t split_seed = 0;
};

// Columns are coding units (flattened patches), values in [0, 1].
struct Dataset {
  SignalMatrix samples;
  DatasetMeta meta;
};

// Ground-truth generator for recovery experiments: signals are sparse
// combinations of a known dictionary plus optional Gaussian noise.
struct PlantedModel {
  Dictionary true_dictionary;
  int s_star = 3;
  double noise_sigma = 0.0;
  double coeff_min = 0.5;  // minimum coefficient magnitude
};

std::pair<Dataset, SparseCode> generate_planted(const PlantedModel& model, int n,
                                                std::uint64_t seed);

// Grayscale image, row-major pixels in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double& at(int row, int col) { return pixels[std::size_t(row) * width + col]; }
  double at(int row, int col) const { return pixels[std::size_t(row) * width + col]; }
};

// Binary PGM (P5), 8-bit maxval 255.
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);
void write_pgm(const std::string& path, const Matrix& pixels);  // values clamped to [0, 1]

// Seeded random p x p crops from every readable .pgm file in the directory,
// flattened row-major into columns. Unreadable files are skipped with a
// warning; an empty directory is an error.
Dataset load_images(const std::string& dir_path, int patch, int max_patches,
                    std::uint64_t seed);

// Procedural grayscale images (gradients, blobs, gratings, edges) for
// self-contained experiments.
std::vector<GrayImage> synthetic_images(int count, int size, std::uint64_t seed);
Dataset patches_from_images(const std::vector<GrayImage>& images, int patch, int max_patches,
                            std::uint64_t seed);

struct EmaSnapshot {
  Vector counts;
  Matrix sums;
};

// "LSRS" checkpoint: magic, version 0x01, u32 K, u32 L, f32 row-major atoms,
// then one flag byte + payload for the optional EMA and coder sections.
// All integers and floats little-endian.
struct Checkpoint {
  Dictionary dictionary;
  std::optional<EmaSnapshot> ema;
  std::optional<AffineCoder> coder;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lasers

#endif
