#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "robogrid/error.hpp"
#include "robogrid/feature_file.hpp"
#include "robogrid/image.hpp"

namespace robogrid::metrics {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Frechet distance between Gaussians fitted to clip features.

struct FeatureSet {
  MatrixXd vectors;  // N x d, one row per clip
  std::string source_tag;
};

inline FeatureSet to_feature_set(const FeatureMatrix& m, std::string tag) {
  FeatureSet fs{MatrixXd(m.rows, m.cols), std::move(tag)};
  for (std::uint32_t r = 0; r < m.rows; ++r) {
    for (std::uint32_t c = 0; c < m.cols; ++c) fs.vectors(r, c) = m.at(r, c);
  }
  return fs;
}

struct GaussianStats {
  VectorXd mean;
  MatrixXd covariance;
};

// Sample mean and unbiased (N-1) covariance, symmetrized.
inline GaussianStats fit_gaussian(const FeatureSet& features) {
  const auto& x = features.vectors;
  if (x.rows() < 2) {
    throw InsufficientSamples("covariance needs at least 2 feature vectors, '" + features.source_tag + "' has " +
                              std::to_string(x.rows()));
  }
  if (x.cols() < 1) throw InvalidInput("feature dimension must be >= 1");
  if (!x.allFinite()) throw InvalidInput("feature set '" + features.source_tag + "' contains non-finite values");
  GaussianStats s;
  s.mean = x.colwise().mean().transpose();
  const MatrixXd centered = x.rowwise() - s.mean.transpose();
  const MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  s.covariance = 0.5 * (cov + cov.transpose());
  return s;
}

// Principal square root of a symmetric PSD matrix via eigendecomposition;
// negative eigenvalues (numerical noise) are clamped to zero.
inline MatrixXd symmetric_sqrt(const MatrixXd& m) {
  if (m.rows() != m.cols()) throw InvalidInput("matrix square root needs a square matrix");
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition did not converge");
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

//   ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r^1/2 S_g S_r^1/2)^1/2)
// With R = S_r^1/2 S_g^1/2, the inner product is R R^T, so the trace of its
// root is the sum of the singular values of R. Taking singular values of R
// rather than eigenvalues of R R^T avoids squaring the condition number and
// cannot produce negative values.
inline double frechet_distance(const GaussianStats& real, const GaussianStats& gen) {
  const Eigen::Index d = real.mean.size();
  if (gen.mean.size() != d || real.covariance.rows() != d || real.covariance.cols() != d ||
      gen.covariance.rows() != d || gen.covariance.cols() != d) {
    throw InvalidInput("Gaussian statistics have mismatched dimensions");
  }
  const MatrixXd cross = symmetric_sqrt(real.covariance) * symmetric_sqrt(gen.covariance);
  Eigen::BDCSVD<MatrixXd> svd(cross);
  if (svd.info() != Eigen::Success) throw NumericalError("singular value decomposition did not converge");
  const double trace_root = svd.singularValues().sum();
  const double mean_term = (real.mean - gen.mean).squaredNorm();
  const double value = mean_term + real.covariance.trace() + gen.covariance.trace() - 2.0 * trace_root;
  if (!std::isfinite(value)) throw NumericalError("Frechet distance is not finite");
  return std::max(value, 0.0);
}

// ---------------------------------------------------------------------------
// Frame-wise metrics.

inline GrayImage to_luma(const Frame& f) {
  GrayImage g(f.height(), f.width());
  const auto px = f.pixels();
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    g.values[i] = 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
  }
  return g;
}

struct SsimOptions {
  int window = 8;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

namespace detail {

// Sums of `values` over every window x window block, stride 1; separable.
inline std::vector<double> box_sums(const std::vector<double>& values, int height, int width, int window) {
  const int out_w = width - window + 1;
  const int out_h = height - window + 1;
  std::vector<double> rows(static_cast<std::size_t>(height) * out_w);
  for (int r = 0; r < height; ++r) {
    const double* src = values.data() + static_cast<std::size_t>(r) * width;
    for (int c = 0; c < out_w; ++c) {
      double s = 0.0;
      for (int k = 0; k < window; ++k) s += src[c + k];
      rows[static_cast<std::size_t>(r) * out_w + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      double s = 0.0;
      for (int k = 0; k < window; ++k) s += rows[static_cast<std::size_t>(r + k) * out_w + c];
      out[static_cast<std::size_t>(r) * out_w + c] = s;
    }
  }
  return out;
}

}  // namespace detail

// Mean SSIM over all window x window blocks (uniform weights, stride 1).
// Local variances and covariance use the N-1 denominator.
inline double ssim(const GrayImage& x, const GrayImage& y, const SsimOptions& opt = {}) {
  if (x.height != y.height || x.width != y.width) {
    throw InvalidInput("SSIM needs equal image sizes, got " + std::to_string(x.width) + "x" +
                       std::to_string(x.height) + " and " + std::to_string(y.width) + "x" + std::to_string(y.height));
  }
  if (opt.window < 2) throw InvalidInput("SSIM window must be >= 2");
  if (x.height < opt.window || x.width < opt.window) {
    throw InvalidInput("image " + std::to_string(x.width) + "x" + std::to_string(x.height) + " is smaller than the " +
                       std::to_string(opt.window) + "x" + std::to_string(opt.window) + " SSIM window");
  }
  const std::size_t n = x.values.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x.values[i] * x.values[i];
    yy[i] = y.values[i] * y.values[i];
    xy[i] = x.values[i] * y.values[i];
  }
  const int h = x.height, w = x.width, win = opt.window;
  const auto sx = detail::box_sums(x.values, h, w, win);
  const auto sy = detail::box_sums(y.values, h, w, win);
  const auto sxx = detail::box_sums(xx, h, w, win);
  const auto syy = detail::box_sums(yy, h, w, win);
  const auto sxy = detail::box_sums(xy, h, w, win);

  const double count = static_cast<double>(win) * win;
  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < sx.size(); ++i) {
    const double mx = sx[i] / count;
    const double my = sy[i] / count;
    const double vx = (sxx[i] - sx[i] * mx) / (count - 1.0);
    const double vy = (syy[i] - sy[i] * my) / (count - 1.0);
    const double cxy = (sxy[i] - sx[i] * my) / (count - 1.0);
    total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return std::clamp(total / static_cast<double>(sx.size()), -1.0, 1.0);
}

inline double ssim(const Frame& x, const Frame& y, const SsimOptions& opt = {}) {
  return ssim(to_luma(x), to_luma(y), opt);
}

inline double mse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("MSE needs inputs of equal length");
  if (x.empty()) throw InvalidInput("MSE of empty inputs is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.size());
}

// Over all pixel channels, scaled to [0, 1].
inline double mse(const Frame& x, const Frame& y) {
  if (x.size() != y.size()) {
    throw InvalidInput("MSE needs equal frame sizes, got " + to_string(x.size()) + " and " + to_string(y.size()));
  }
  const auto a = x.pixels();
  const auto b = y.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (static_cast<double>(a[i]) - static_cast<double>(b[i])) / 255.0;
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

inline double success_rate(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) throw InvalidInput("success rate needs at least one outcome");
  const auto hits = std::count(outcomes.begin(), outcomes.end(), true);
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

struct EpisodeScore {
  double ssim = 0.0;
  double mse = 0.0;
};

// Per-frame SSIM and MSE averaged over the frame pairs.
inline EpisodeScore evaluate_generation(std::span<const Frame> pred, std::span<const Frame> gt,
                                        const SsimOptions& opt = {}) {
  if (pred.size() != gt.size()) {
    throw InvalidInput("prediction has " + std::to_string(pred.size()) + " frames, ground truth has " +
                       std::to_string(gt.size()));
  }
  if (pred.empty()) throw InvalidInput("no frames to evaluate");
  EpisodeScore s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s.ssim += ssim(pred[i], gt[i], opt);
    s.mse += mse(pred[i], gt[i]);
  }
  s.ssim /= static_cast<double>(pred.size());
  s.mse /= static_cast<double>(pred.size());
  return s;
}

// ---------------------------------------------------------------------------
// Labels and reports.

struct Label {
  std::string episode_id;
  bool success = false;
};

// JSON lines of {"episode_id": ..., "success": true|false}; blank lines skipped.
inline std::vector<Label> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read labels file '" + path.string() + "'");
  std::vector<Label> out;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("episode_id") || !j["episode_id"].is_string() || !j.contains("success") ||
        !j["success"].is_boolean()) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) +
                         ": expected {\"episode_id\": string, \"success\": bool}");
    }
    Label l{j["episode_id"].get<std::string>(), j["success"].get<bool>()};
    if (!seen.insert(l.episode_id).second) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": duplicate label for '" + l.episode_id + "'");
    }
    out.push_back(std::move(l));
  }
  return out;
}

struct MetricReport {
  std::string dataset;
  std::string method;
  std::optional<double> fvd;
  double ssim = 0.0;
  double mse = 0.0;
  std::optional<double> success_rate;
  int n_episodes = 0;
};

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["method"] = r.method;
  j["fvd"] = r.fvd ? nlohmann::json(*r.fvd) : nlohmann::json(nullptr);
  j["ssim"] = r.ssim;
  j["mse"] = r.mse;
  j["success_rate"] = r.success_rate ? nlohmann::json(*r.success_rate) : nlohmann::json(nullptr);
  j["n_episodes"] = r.n_episodes;
  return j;
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      const std::string& cell = rows[r][i];
      // First column(s) left-aligned text, metric columns right-aligned.
      if (i + 4 < rows[r].size()) {
        out << cell << std::string(widths[i] - cell.size(), ' ');
      } else {
        out << std::string(widths[i] - cell.size(), ' ') << cell;
      }
      if (i + 1 < rows[r].size()) out << "  ";
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < widths.size(); ++i) total += widths[i] + (i + 1 < widths.size() ? 2 : 0);
      out << std::string(total, '-') << "\n";
    }
  }
  return out.str();
}

inline std::vector<std::string> metric_cells(const MetricReport& r) {
  return {r.fvd ? fmt("%.1f", *r.fvd) : "-", fmt("%.3f", r.ssim), fmt("%.5f", r.mse),
          r.success_rate ? fmt("%.1f%%", 100.0 * *r.success_rate) : "-"};
}

}  // namespace detail

// Dataset | Method | FVD | SSIM | MSE | Success
inline std::string format_results_table(const std::vector<MetricReport>& reports) {
  std::vector<std::vector<std::string>> rows{{"Dataset", "Method", "FVD", "SSIM", "MSE", "Success"}};
  for (const auto& r : reports) {
    std::vector<std::string> row{r.dataset, r.method};
    for (auto& c : detail::metric_cells(r)) row.push_back(std::move(c));
    rows.push_back(std::move(row));
  }
  return detail::render_table(rows);
}

// Configuration | FVD | SSIM | MSE | Success, one row per report with the
// report's method used as the configuration label.
inline std::string format_ablation_table(const std::vector<MetricReport>& reports) {
  std::vector<std::vector<std::string>> rows{{"Configuration", "FVD", "SSIM", "MSE", "Success"}};
  for (const auto& r : reports) {
    std::vector<std::string> row{r.method};
    for (auto& c : detail::metric_cells(r)) row.push_back(std::move(c));
    rows.push_back(std::move(row));
  }
  return detail::render_table(rows);
}

}  // namespace robogrid::metrics
