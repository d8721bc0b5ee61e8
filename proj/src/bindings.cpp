#include <lasers/autoencoder.hpp>
#include <lasers/data_io.hpp>
#include <lasers/experiment.hpp>
#include <lasers/metrics.hpp>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace lasers;

namespace {

LatentTensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 3) throw DimensionError("latent tensor must be a (H, W, L) array");
  LatentTensor z(int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2)));
  std::memcpy(z.data.data(), arr.data(), sizeof(double) * z.size());
  return z;
}

py::array_t<double> array_from_tensor(const LatentTensor& z) {
  py::array_t<double> arr({z.h, z.w, z.l});
  std::memcpy(arr.mutable_data(), z.data.data(), sizeof(double) * z.size());
  return arr;
}

Dictionary dictionary_from_matrix(const Matrix& atoms) {
  Dictionary d(int(atoms.rows()), int(atoms.cols()));
  d.atoms = atoms;
  return d;
}

py::list code_to_list(const SparseCode& code) {
  py::list out;
  for (const auto& col : code.columns)
    out.append(py::make_tuple(col.support, col.coeffs));
  return out;
}

SparseCode code_from_list(int k, const py::list& cols) {
  SparseCode code;
  code.k = k;
  for (const auto& item : cols) {
    const auto tup = item.cast<py::tuple>();
    SparseCode::Column col;
    col.support = tup[0].cast<std::vector<int>>();
    col.coeffs = tup[1].cast<std::vector<double>>();
    code.columns.push_back(std::move(col));
  }
  return code;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "latent-space compression bottlenecks: sparse dictionary coding and "
            "vector quantization";

  py::register_exception<Error>(m, "LasersError");

  // --- tensor layout ---
  m.def(
      "unfold",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z, int p_h,
         int p_w, bool patch_mode) {
        PatchGeometry g{p_h, p_w, patch_mode ? CodingUnit::Patch : CodingUnit::Fiber};
        return Matrix(unfold(tensor_from_array(z), g));
      },
      py::arg("z"), py::arg("p_h") = 1, py::arg("p_w") = 1, py::arg("patch_mode") = false,
      "Unfold an (H, W, L) latent tensor into column-stacked coding units.");
  m.def(
      "fold",
      [](const Matrix& mat, int h, int w, int l, int p_h, int p_w, bool patch_mode) {
        PatchGeometry g{p_h, p_w, patch_mode ? CodingUnit::Patch : CodingUnit::Fiber};
        return array_from_tensor(fold(mat, g, h, w, l));
      },
      py::arg("m"), py::arg("h"), py::arg("w"), py::arg("l"), py::arg("p_h") = 1,
      py::arg("p_w") = 1, py::arg("patch_mode") = false,
      "Inverse of unfold for the same geometry.");

  // --- sparse coding ---
  m.def(
      "naive_omp",
      [](const Vector& y, const Matrix& atoms, int s) {
        const OmpResult r = naive_omp(y, dictionary_from_matrix(atoms), s);
        return py::make_tuple(r.support, r.coeffs, r.residual_norm);
      },
      py::arg("y"), py::arg("dictionary"), py::arg("s"),
      "Reference greedy pursuit; returns (support, coeffs, residual_norm).");
  m.def(
      "batch_omp",
      [](const Matrix& signals, const Matrix& atoms, int s, int threads) {
        return code_to_list(batch_omp(signals, dictionary_from_matrix(atoms), s, threads));
      },
      py::arg("signals"), py::arg("dictionary"), py::arg("s"), py::arg("threads") = 1,
      "Batch-OMP; returns a list of (support, coeffs) per column.");
  m.def(
      "reconstruct",
      [](int k, const py::list& code, const Matrix& atoms) {
        return Matrix(reconstruct(code_from_list(k, code), dictionary_from_matrix(atoms)));
      },
      py::arg("k"), py::arg("code"), py::arg("dictionary"));

  // --- dictionary ---
  m.def(
      "init_dictionary",
      [](int k, int l, const std::string& strategy, std::uint64_t seed,
         std::optional<Matrix> data) {
        const InitStrategy st = strategy == "sample" ? InitStrategy::DataSample
                                                     : InitStrategy::GaussianNormalized;
        const SignalMatrix* ptr = data ? &*data : nullptr;
        return Matrix(init_dictionary(k, l, st, seed, ptr).atoms);
      },
      py::arg("k"), py::arg("l"), py::arg("strategy") = "gaussian", py::arg("seed") = 0,
      py::arg("data") = std::nullopt);
  m.def("adaptive_beta", &adaptive_beta, py::arg("t"), py::arg("xi"));

  // --- vector quantization ---
  m.def(
      "vq_assign",
      [](const Matrix& z, const Matrix& codewords, int threads) {
        const Assignment a =
            assign(z, Codebook::from_dictionary(dictionary_from_matrix(codewords)), threads);
        return py::make_tuple(a.indices, a.distances);
      },
      py::arg("z"), py::arg("codewords"), py::arg("threads") = 1,
      "Nearest codeword per column; returns (indices, squared distances).");
  m.def(
      "vq_reconstruct",
      [](const std::vector<int>& indices, const Matrix& codewords) {
        Assignment a;
        a.indices = indices;
        return Matrix(
            one_hot_reconstruct(a, Codebook::from_dictionary(dictionary_from_matrix(codewords))));
      },
      py::arg("indices"), py::arg("codewords"));

  // --- metrics ---
  m.def("mse", [](const Matrix& a, const Matrix& b) { return mse(a, b); }, py::arg("a"),
        py::arg("b"));
  m.def("psnr", [](const Matrix& a, const Matrix& b, double peak) { return psnr(a, b, peak); },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  m.def(
      "perplexity",
      [](const std::vector<long>& counts) {
        return perplexity(UsageHistogram::from_counts(counts));
      },
      py::arg("counts"));
  m.def(
      "utilization",
      [](const std::vector<long>& counts) {
        return utilization(UsageHistogram::from_counts(counts));
      },
      py::arg("counts"));
  m.def("savitzky_golay", &savitzky_golay, py::arg("series"), py::arg("window"),
        py::arg("order"));
  m.def(
      "top_singular_projection",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z) {
        return Matrix(top_singular_projection(tensor_from_array(z)));
      },
      py::arg("z"));

  // --- data ---
  m.def(
      "generate_planted",
      [](const Matrix& atoms, int s_star, double noise_sigma, double coeff_min, int n,
         std::uint64_t seed) {
        PlantedModel model{dictionary_from_matrix(atoms), s_star, noise_sigma, coeff_min};
        auto [ds, truth] = generate_planted(model, n, seed);
        return py::make_tuple(Matrix(ds.samples), code_to_list(truth));
      },
      py::arg("dictionary"), py::arg("s_star"), py::arg("noise_sigma"), py::arg("coeff_min"),
      py::arg("n"), py::arg("seed"));

  // --- training ---
  m.def(
      "train",
      [](const Matrix& dataset, const py::dict& options, int threads) {
        cli::ExpConfig cfg;
        for (const auto& item : options)
          cli::set_key(cfg, py::str(item.first), py::str(item.second));
        Trainer trainer(cfg.train, dataset, threads);
        const auto series = trainer.train(dataset);
        py::list rows;
        for (const auto& em : series) {
          py::dict row;
          row["epoch"] = em.epoch;
          row["mse"] = em.mse;
          row["psnr"] = em.psnr;
          row["perplexity"] = em.perplexity;
          row["utilization"] = em.utilization;
          row["codebook_term"] = em.codebook_term;
          row["commitment_term"] = em.commitment_term;
          rows.append(row);
        }
        const Bottleneck& bn = trainer.bottleneck();
        const Matrix atoms = bn.kind == BottleneckKind::VQ ? bn.codebook.embedding.atoms
                                                           : bn.dictionary.atoms;
        return py::make_tuple(rows, atoms);
      },
      py::arg("dataset"), py::arg("options") = py::dict(), py::arg("threads") = 1,
      "Train a bottleneck on column-stacked data; returns (epoch rows, atom matrix). "
      "Options take the same keys as the CLI config files.");
}
