#include "qlbgk/state.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

namespace qlbgk {

DensityOperator::DensityOperator(Grid grid, RealVector weights,
                                 Eigen::MatrixXcd modes, double discarded_mass)
    : grid_(grid), discarded_mass_(discarded_mass) {
  if (modes.cols() != weights.size() ||
      (modes.cols() > 0 && modes.rows() != grid.size())) {
    throw InvalidArgument("DensityOperator: modes/weights shape mismatch");
  }
  if (weights.size() > 0 && weights.minCoeff() < 0.0) {
    throw PositivityError("DensityOperator: negative weight");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return weights(a) > weights(b);
  });
  weights_.resize(weights.size());
  modes_.resize(grid.size(), modes.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    weights_(idx) = weights(order[k]);
    modes_.col(idx) = modes.col(order[k]);
  }
}

DensityOperator DensityOperator::from_kernel(const Grid& grid,
                                             const Eigen::MatrixXcd& kernel,
                                             double discarded_mass) {
  const HermitianDecomposition eig = eig_hermitian(kernel, grid);
  const double tr = eig.eigenvalues.sum();
  const double clamp = 1e-12 * std::max(1.0, std::abs(tr));
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < eig.eigenvalues.size(); ++j) {
    const double w = eig.eigenvalues(j);
    if (w < -clamp) {
      throw PositivityError("DensityOperator::from_kernel: weight " +
                            std::to_string(w) + " below clamp threshold");
    }
    if (w > 0.0) ++kept;
  }
  // Descending order: the positive weights are the leading columns.
  return DensityOperator(grid, eig.eigenvalues.head(kept),
                         eig.eigenvectors.leftCols(kept), discarded_mass);
}

DensityOperator DensityOperator::with_modes(Eigen::MatrixXcd modes) const {
  if (modes.rows() != modes_.rows() || modes.cols() != modes_.cols()) {
    throw InvalidArgument("with_modes: shape mismatch");
  }
  DensityOperator out = *this;
  out.modes_ = std::move(modes);
  return out;
}

RealVector local_density(const DensityOperator& rho) {
  return rho.modes().cwiseAbs2() * rho.weights();
}

double trace(const DensityOperator& rho) { return rho.weights().sum(); }

DensityOperator truncate(const DensityOperator& rho, double threshold) {
  if (threshold < 0.0) {
    throw InvalidArgument("truncate: threshold must be nonnegative");
  }
  const RealVector& w = rho.weights();
  Eigen::Index kept = 0;
  while (kept < w.size() && w(kept) >= threshold) ++kept;
  const double dropped = w.tail(w.size() - kept).sum();
  return DensityOperator(rho.grid(), w.head(kept), rho.modes().leftCols(kept),
                         rho.discarded_mass() + dropped);
}

DensityOperator truncate_preserving_trace(const DensityOperator& rho,
                                          double threshold) {
  const DensityOperator cut = truncate(rho, threshold);
  const double kept_trace = trace(cut);
  if (cut.empty() || kept_trace <= 0.0) return cut;
  return DensityOperator(cut.grid(), cut.weights() * (trace(rho) / kept_trace),
                         cut.modes(), cut.discarded_mass());
}

Eigen::MatrixXcd assemble_matrix(const DensityOperator& rho) {
  const Eigen::MatrixXcd scaled = rho.modes() * rho.weights().asDiagonal();
  return scaled * rho.modes().adjoint();
}

double free_energy(const DensityOperator& rho, const TridiagonalOperator& h0) {
  double f = 0.0;
  const double dx = rho.grid().dx();
  for (int p = 0; p < rho.mode_count(); ++p) {
    const double w = rho.weights()(p);
    if (w > 0.0) f += w * std::log(w) - w;
    const ComplexVector phi = rho.modes().col(p);
    const ComplexVector h_phi = h0.apply(phi);
    f += w * (dx * phi.dot(h_phi)).real();
  }
  return f;
}

double kernel_distance(const DensityOperator& a, const DensityOperator& b) {
  return (assemble_matrix(a) - assemble_matrix(b)).cwiseAbs().maxCoeff();
}

nlohmann::json to_json(const DensityOperator& rho) {
  nlohmann::json j;
  j["format"] = "qlbgk-density-operator";
  j["version"] = 1;
  j["grid_points"] = rho.grid().size();
  j["discarded_mass"] = rho.discarded_mass();
  j["weights"] = std::vector<double>(rho.weights().data(),
                                     rho.weights().data() + rho.mode_count());
  auto re = nlohmann::json::array();
  auto im = nlohmann::json::array();
  for (int p = 0; p < rho.mode_count(); ++p) {
    std::vector<double> r(static_cast<std::size_t>(rho.grid().size()));
    std::vector<double> i(r.size());
    for (int k = 0; k < rho.grid().size(); ++k) {
      r[static_cast<std::size_t>(k)] = rho.modes()(k, p).real();
      i[static_cast<std::size_t>(k)] = rho.modes()(k, p).imag();
    }
    re.push_back(std::move(r));
    im.push_back(std::move(i));
  }
  j["modes_real"] = std::move(re);
  j["modes_imag"] = std::move(im);
  return j;
}

DensityOperator density_operator_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "qlbgk-density-operator" ||
      j.value("version", 0) != 1) {
    throw InvalidArgument("not a qlbgk-density-operator v1 document");
  }
  const Grid grid(j.at("grid_points").get<int>());
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto& re = j.at("modes_real");
  const auto& im = j.at("modes_imag");
  if (re.size() != w.size() || im.size() != w.size()) {
    throw InvalidArgument("density operator document: mode count mismatch");
  }
  RealVector weights(static_cast<Eigen::Index>(w.size()));
  Eigen::MatrixXcd modes(grid.size(), static_cast<Eigen::Index>(w.size()));
  for (std::size_t p = 0; p < w.size(); ++p) {
    const auto r = re[p].get<std::vector<double>>();
    const auto i = im[p].get<std::vector<double>>();
    if (r.size() != static_cast<std::size_t>(grid.size()) ||
        i.size() != r.size()) {
      throw InvalidArgument("density operator document: mode length mismatch");
    }
    const auto col = static_cast<Eigen::Index>(p);
    weights(col) = w[p];
    for (std::size_t k = 0; k < r.size(); ++k) {
      modes(static_cast<Eigen::Index>(k), col) = Complex(r[k], i[k]);
    }
  }
  return DensityOperator(grid, std::move(weights), std::move(modes),
                         j.value("discarded_mass", 0.0));
}

void save_density_operator(const DensityOperator& rho,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json(rho).dump() << '\n';
}

DensityOperator load_density_operator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return density_operator_from_json(nlohmann::json::parse(in));
}

} // namespace qlbgk
