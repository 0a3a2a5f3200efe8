// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../fixture.hpp"
#include "../support.hpp"
#include "robogrid/robogrid.hpp"

#ifndef ROBOGRID_CLI_PATH
#error "ROBOGRID_CLI_PATH must name the robogrid executable"
#endif

namespace {

using namespace robogrid;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Collects the first few failure messages of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (notes_.size() < 3) notes_.push_back(what);
  }
  bool passed() const { return failures_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failures_) + " failure(s)";
    for (const auto& n : notes_) s += "; " + n;
    return s;
  }

 private:
  int failures_ = 0;
  std::vector<std::string> notes_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

std::string grid_roundtrip(Check& c) {
  std::mt19937 rng(1001);
  std::uniform_int_distribution<int> dim(8, 96);
  const auto t0 = Clock::now();
  for (int i = 0; i < 200; ++i) {
    const int h = dim(rng), w = dim(rng);
    const auto frames = testing::random_frames(rng, 9, h, w);
    const auto back = disassemble_grid(assemble_grid(frames));
    c.expect(back == frames, "set " + std::to_string(i) + " (" + std::to_string(h) + "x" + std::to_string(w) + ")");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, "runtime " + std::to_string(secs) + " s");
  return "200 sets, " + std::to_string(secs) + " s";
}

std::string serpentine_layout(Check& c) {
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) {
      const int t = testing::kLayoutTable[r][col];
      const Cell cell = serpentine_cell(t);
      c.expect(cell.row == r && cell.col == col, "frame " + std::to_string(t));
      c.expect(GridLayout::serpentine().frame_at({r, col}) == t, "frame_at " + std::to_string(t));
    }
  }
  // Each tile of an assembled grid carries its frame index as a flat colour.
  std::vector<Frame> frames;
  for (int t = 1; t <= 9; ++t) frames.emplace_back(4, 4, Rgb{static_cast<std::uint8_t>(t), 0, 0});
  const GridImage grid = assemble_grid(frames);
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) {
      c.expect(grid.tile({r, col}).at(0, 0).r == testing::kLayoutTable[r][col], "tile content");
    }
  }
  return "9 cells";
}

std::string mask_contract(Check& c) {
  std::mt19937 rng(1003);
  std::uniform_int_distribution<int> dim(3, 40);
  for (int i = 0; i < 100; ++i) {
    const int h = dim(rng), w = dim(rng);
    auto frames = testing::random_frames(rng, 9, h, w);
    frames[0].set(0, 0, {1, 2, 3});
    const GridImage grid = assemble_grid(frames);
    const GridImage masked = apply_mask(grid, GridMask::first_frame());
    int nonzero = 0;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) {
        const Frame tile = masked.tile({r, col});
        const auto& px = tile.pixels();
        if (std::any_of(px.begin(), px.end(), [](std::uint8_t v) { return v != 0; })) ++nonzero;
      }
    }
    c.expect(nonzero == 1, "grid " + std::to_string(i) + " has " + std::to_string(nonzero) + " nonzero tiles");
    c.expect(masked.tile({0, 0}) == frames[0], "grid " + std::to_string(i) + " first tile altered");
    c.expect(apply_mask(masked, GridMask::first_frame()) == masked, "grid " + std::to_string(i) + " not idempotent");
  }
  return "100 grids";
}

std::string sampling_oracle(Check& c) {
  for (std::int64_t T = 1; T <= 200; ++T) {
    for (int K : {1, 9}) {
      const auto idx = sample_uniform(T, K);
      c.expect(idx == testing::nearest_linear_positions(T, K), "T=" + std::to_string(T) + " K=" + std::to_string(K));
      if (T >= 2 && K >= 2) {
        c.expect(idx.front() == 0 && idx.back() == T - 1, "endpoints T=" + std::to_string(T));
      }
    }
  }
  return "400 (T, K) cases";
}

std::string overlay_locality(Check& c) {
  std::mt19937 rng(1005);
  std::uniform_int_distribution<int> dim(8, 48);
  std::uniform_int_distribution<int> npts(2, 8);
  std::uniform_int_distribution<int> width(1, 6);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 100; ++i) {
    const int h = dim(rng), w = dim(rng);
    const Frame base = testing::random_frame(rng, h, w);
    std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
    std::vector<Point> pts(static_cast<std::size_t>(npts(rng)));
    for (auto& p : pts) p = {xs(rng), ys(rng)};
    ColorRamp ramp;
    ramp.start = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                  static_cast<std::uint8_t>(byte(rng))};
    ramp.end = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                static_cast<std::uint8_t>(byte(rng))};
    ramp.stroke_width = width(rng);
    const Frame out = render_overlay(base, Trajectory(pts), ramp);
    const double reach = ramp.stroke_width / 2.0;
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        if (out.at(r, col) == base.at(r, col)) continue;
        double best = 1e9;
        for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
          best = std::min(best, testing::chebyshev_to_segment({col, r}, pts[s], pts[s + 1]));
        }
        c.expect(best <= reach + 1e-9, "trajectory " + std::to_string(i) + " changed pixel beyond reach");
      }
    }
    // One segment is drawn wholly in the start colour; a closed path's shared
    // endpoint pixel can only hold one of the two colours.
    const Rgb last = pts.size() > 2 ? ramp.end : ramp.start;
    c.expect(out.at(pts.back().y, pts.back().x) == last, "trajectory " + std::to_string(i) + " end colour");
    if (pts.front() != pts.back()) {
      c.expect(out.at(pts.front().y, pts.front().x) == ramp.start, "trajectory " + std::to_string(i) + " start colour");
    }
  }
  return "100 trajectories";
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double fd_loss(const lora::DenseLayer& layer, const lora::LoraAdapter& a, const Eigen::VectorXd& x,
               const Eigen::VectorXd& y) {
  return (lora::lora_forward(layer, a, x) - y).squaredNorm();
}

std::string lora_equivalence(Check& c) {
  std::mt19937_64 rng(1006);
  std::uniform_int_distribution<int> dim(1, 128);
  std::uniform_int_distribution<int> rank(1, 8);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int d_out = dim(rng), d_in = dim(rng);
    const int r = std::min({rank(rng), d_out, d_in});
    lora::DenseLayer layer{gaussian(d_out, d_in, rng), Eigen::VectorXd(gaussian(d_out, 1, rng).col(0))};
    lora::LoraAdapter a{gaussian(d_out, r, rng), gaussian(d_in, r, rng), 0.5 + static_cast<double>(i % 5)};
    const Eigen::VectorXd x = gaussian(d_in, 1, rng).col(0);
    const double dev = (lora::merge_adapter(layer, a).forward(x) - lora::lora_forward(layer, a, x)).cwiseAbs().maxCoeff();
    worst = std::max(worst, dev);
    c.expect(dev <= 1e-6, "instance " + std::to_string(i) + " deviation " + std::to_string(dev));

    lora::LoraAdapter zero_b = a;
    zero_b.b.setZero();
    c.expect(lora::lora_forward(layer, zero_b, x) == layer.forward(x), "B=0 instance " + std::to_string(i));
    lora::LoraAdapter zero_alpha = a;
    zero_alpha.alpha = 0.0;
    c.expect(lora::lora_forward(layer, zero_alpha, x) == layer.forward(x), "alpha=0 instance " + std::to_string(i));
    c.expect(lora::merge_adapter(layer, zero_alpha).weight == layer.weight, "alpha=0 merge " + std::to_string(i));
  }

  std::uniform_int_distribution<int> small(1, 16);
  double worst_grad = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int d_out = small(rng), d_in = small(rng);
    const int r = std::min({rank(rng), d_out, d_in});
    lora::DenseLayer layer{gaussian(d_out, d_in, rng), Eigen::VectorXd(gaussian(d_out, 1, rng).col(0))};
    lora::LoraAdapter a{gaussian(d_out, r, rng), gaussian(d_in, r, rng), 1.0 + 0.25 * (i % 4)};
    const Eigen::VectorXd x = gaussian(d_in, 1, rng).col(0);
    const Eigen::VectorXd y = gaussian(d_out, 1, rng).col(0);
    const auto g = lora::squared_error_gradients(layer, a, x, y);
    const double h = 1e-6;
    Eigen::MatrixXd fa(a.a.rows(), a.a.cols()), fb(a.b.rows(), a.b.cols());
    for (Eigen::Index k = 0; k < a.a.size(); ++k) {
      lora::LoraAdapter up = a, down = a;
      up.a.data()[k] += h;
      down.a.data()[k] -= h;
      fa.data()[k] = (fd_loss(layer, up, x, y) - fd_loss(layer, down, x, y)) / (2 * h);
    }
    for (Eigen::Index k = 0; k < a.b.size(); ++k) {
      lora::LoraAdapter up = a, down = a;
      up.b.data()[k] += h;
      down.b.data()[k] -= h;
      fb.data()[k] = (fd_loss(layer, up, x, y) - fd_loss(layer, down, x, y)) / (2 * h);
    }
    const double ea = (g.grad_a - fa).norm() / std::max(fa.norm(), 1e-12);
    const double eb = (g.grad_b - fb).norm() / std::max(fb.norm(), 1e-12);
    worst_grad = std::max({worst_grad, ea, eb});
    c.expect(ea < 1e-4 && eb < 1e-4, "gradient instance " + std::to_string(i));
  }
  c.expect(lora::param_count(64, 64, 4) == 512, "param_count(64,64,4)");
  std::ostringstream s;
  s << "max merge dev " << worst << ", max grad rel err " << worst_grad;
  return s.str();
}

// ---------------------------------------------------------------------------

metrics::GaussianStats random_stats(int d, std::mt19937_64& rng) {
  metrics::FeatureSet fs{gaussian(d + 5 + d / 2, d, rng), "r"};
  fs.vectors = fs.vectors * gaussian(d, d, rng);
  return metrics::fit_gaussian(fs);
}

std::string frechet(Check& c) {
  std::mt19937_64 rng(1007);
  std::uniform_int_distribution<int> dim(1, 64);
  for (int i = 0; i < 30; ++i) {
    const int d = dim(rng);
    const auto a = random_stats(d, rng);
    const auto b = random_stats(d, rng);
    const double self = metrics::frechet_distance(a, a);
    c.expect(std::abs(self) <= 1e-8, "self distance " + std::to_string(self) + " at d=" + std::to_string(d));
    const double ab = metrics::frechet_distance(a, b), ba = metrics::frechet_distance(b, a);
    c.expect(std::abs(ab - ba) <= 1e-8 * std::max(1.0, std::abs(ab)), "asymmetry at d=" + std::to_string(d));
  }
  std::uniform_real_distribution<double> mean(-10, 10), var(1e-3, 25);
  for (int i = 0; i < 100; ++i) {
    const double m1 = mean(rng), m2 = mean(rng), v1 = var(rng), v2 = var(rng);
    metrics::GaussianStats a{Eigen::VectorXd::Constant(1, m1), Eigen::MatrixXd::Constant(1, 1, v1)};
    metrics::GaussianStats b{Eigen::VectorXd::Constant(1, m2), Eigen::MatrixXd::Constant(1, 1, v2)};
    const double closed = (m1 - m2) * (m1 - m2) + (std::sqrt(v1) - std::sqrt(v2)) * (std::sqrt(v1) - std::sqrt(v2));
    c.expect(std::abs(metrics::frechet_distance(a, b) - closed) <= 1e-9, "1-D case " + std::to_string(i));
  }
  for (int i = 0; i < 30; ++i) {
    const int d = dim(rng);
    const Eigen::MatrixXd g = gaussian(d, d + (i % 3 == 0 ? -d / 2 : 3), rng);
    const Eigen::MatrixXd m = g * g.transpose();
    const Eigen::MatrixXd s = metrics::symmetric_sqrt(m);
    c.expect((s * s - m).norm() <= 1e-6 * m.norm(), "sqrt residual at d=" + std::to_string(d));
  }
  return "30 self/symmetry, 100 closed-form, 30 sqrt cases";
}

std::string ssim_oracle(Check& c) {
  std::mt19937 rng(1008);
  std::uniform_int_distribution<int> dim(8, 32);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int h = dim(rng), w = dim(rng);
    GrayImage x = testing::random_gray(rng, h, w);
    GrayImage y = testing::random_gray(rng, h, w);
    if (i % 5 == 1) {
      for (std::size_t k = 0; k < y.values.size(); ++k) y.values[k] = 255.0 - x.values[k];
    } else if (i % 5 == 2) {
      for (std::size_t k = 0; k < y.values.size(); ++k) y.values[k] = 0.5 * x.values[k] + 20.0;
    }
    const double got = metrics::ssim(x, y);
    const double want = testing::brute_force_ssim(x, y);
    worst = std::max(worst, std::abs(got - want));
    c.expect(std::abs(got - want) <= 1e-9, "pair " + std::to_string(i));
    c.expect(got >= -1.0 && got <= 1.0, "pair " + std::to_string(i) + " out of range");
    c.expect(std::abs(metrics::ssim(x, x) - 1.0) <= 1e-9, "ssim(x,x) pair " + std::to_string(i));
  }
  std::ostringstream s;
  s << "50 pairs, max |diff| " << worst;
  return s.str();
}

std::string mse_checks(Check& c) {
  c.expect(metrics::mse(Frame(8, 8, Rgb{0, 0, 0}), Frame(8, 8, Rgb{255, 255, 255})) == 1.0, "black vs white");
  std::mt19937 rng(1009);
  for (int i = 0; i < 50; ++i) {
    const Frame a = testing::random_frame(rng, 7 + i % 5, 9);
    const Frame b = testing::random_frame(rng, 7 + i % 5, 9);
    c.expect(metrics::mse(a, a) == 0.0, "mse(x,x) " + std::to_string(i));
    c.expect(metrics::mse(a, b) == metrics::mse(b, a), "symmetry " + std::to_string(i));
  }
  return "50 random pairs";
}

// ---------------------------------------------------------------------------
// End-to-end through the CLI binary.

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = quote(ROBOGRID_CLI_PATH) + " " + args + " >>" + quote(log) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct E2eResult {
  bool ok = false;
  std::string detail;
  double seconds = 0.0;
};

const std::vector<bool> kInjectedLabels{true, false, true, true, false};

E2eResult run_end_to_end(const fs::path& dataset, const fs::path& out) {
  E2eResult res;
  const auto t0 = Clock::now();
  fs::create_directories(out);
  const fs::path log = out.parent_path() / (out.filename().string() + ".log");
  std::ofstream(log, std::ios::trunc).close();
  auto fail = [&](const std::string& why) {
    res.detail = why + " (see " + log.string() + ")";
    res.seconds = seconds_since(t0);
    return res;
  };

  if (run_cli("synthesize --dataset-root " + quote(dataset) + " --output-root " + quote(out / "synth") +
                  " --branch text --seed 7",
              log) != 0) {
    return fail("synthesize failed");
  }
  std::ifstream index(out / "synth" / "pairs.jsonl");
  std::string line;
  int pairs = 0;
  while (std::getline(index, line)) {
    const auto j = nlohmann::json::parse(line);
    const std::string id = j["episode_id"];
    const fs::path target = out / "synth" / j["pair_dir"].get<std::string>() / "target.png";
    for (const char* side : {"gt", "pred"}) {
      if (run_cli("split " + quote(target) + " " + quote(out / side / id), log) != 0) return fail("split failed");
    }
    ++pairs;
  }
  if (pairs != static_cast<int>(kInjectedLabels.size())) return fail("expected 5 pairs, got " + std::to_string(pairs));

  std::ofstream labels(out / "labels.jsonl", std::ios::binary);
  for (std::size_t e = 0; e < kInjectedLabels.size(); ++e) {
    labels << nlohmann::json{{"episode_id", "ep_" + std::to_string(e)}, {"success", bool(kInjectedLabels[e])}}.dump()
           << "\n";
  }
  labels.close();
  write_features(out / "features.fvdf", testing::fixture_features(40, 16));

  const int code = run_cli("evaluate --pred " + quote(out / "pred") + " --gt " + quote(out / "gt") +
                               " --real-features " + quote(out / "features.fvdf") + " --gen-features " +
                               quote(out / "features.fvdf") + " --labels " + quote(out / "labels.jsonl") + " --out " +
                               quote(out / "report.json") + " --table " + quote(out / "table.txt") +
                               " --dataset synthetic --method text",
                           log);
  if (code != 0) return fail("evaluate exited " + std::to_string(code));

  const auto report = nlohmann::json::parse(testing::read_bytes(out / "report.json"));
  const double expected_success = 3.0 / 5.0;
  std::ostringstream s;
  s << "ssim=" << report["ssim"] << " mse=" << report["mse"] << " fvd=" << report["fvd"]
    << " success=" << report["success_rate"];
  res.ok = report["ssim"].is_number() && std::abs(report["ssim"].get<double>() - 1.0) <= 1e-12 &&
           report["mse"].is_number() && report["mse"].get<double>() == 0.0 && report["fvd"].is_number() &&
           std::abs(report["fvd"].get<double>()) <= 1e-8 && report["success_rate"].is_number() &&
           std::abs(report["success_rate"].get<double>() - expected_success) <= 1e-12 && report["n_episodes"] == 5;
  res.seconds = seconds_since(t0);
  res.detail = s.str();
  return res;
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const std::string rel = fs::relative(e.path(), root).generic_string();
    out[rel] = e.is_regular_file() ? testing::read_bytes(e.path()) : std::string("<dir>");
  }
  return out;
}

struct E2eState {
  testing::TempDir tmp{"acceptance"};
  std::optional<std::map<std::string, std::string>> first_tree;
};

std::string end_to_end(Check& c, E2eState& st) {
  testing::make_dataset(st.tmp / "dataset", {.episodes = 5, .length = 14, .size = {24, 24}});
  const E2eResult r = run_end_to_end(st.tmp / "dataset", st.tmp / "run");
  c.expect(r.ok, r.detail);
  c.expect(r.seconds < 30.0, "runtime " + std::to_string(r.seconds) + " s");
  if (r.ok) st.first_tree = snapshot_tree(st.tmp / "run");
  return r.detail + ", " + std::to_string(r.seconds) + " s";
}

std::string determinism(Check& c, E2eState& st) {
  if (!st.first_tree) {
    c.expect(false, "first run did not complete");
    return "";
  }
  // Same output root both times: the effective config records it.
  fs::rename(st.tmp / "run", st.tmp / "run_first");
  fs::rename(st.tmp / "run.log", st.tmp / "run_first.log");
  const E2eResult r = run_end_to_end(st.tmp / "dataset", st.tmp / "run");
  c.expect(r.ok, r.detail);
  const auto second = snapshot_tree(st.tmp / "run");
  c.expect(second.size() == st.first_tree->size(), "file counts differ");
  for (const auto& [rel, bytes] : *st.first_tree) {
    auto it = second.find(rel);
    c.expect(it != second.end() && it->second == bytes, "differs: " + rel);
  }
  return std::to_string(second.size()) + " entries compared";
}

}  // namespace

int main() {
  E2eState e2e;
  const std::vector<std::pair<std::string, std::function<std::string(Check&)>>> criteria{
      {"grid roundtrip", grid_roundtrip},
      {"serpentine layout", serpentine_layout},
      {"mask contract", mask_contract},
      {"sampling oracle", sampling_oracle},
      {"overlay locality", overlay_locality},
      {"LoRA equivalence", lora_equivalence},
      {"Frechet distance", frechet},
      {"SSIM oracle", ssim_oracle},
      {"MSE", mse_checks},
      {"end-to-end fixture", [&](Check& c) { return end_to_end(c, e2e); }},
      {"determinism", [&](Check& c) { return determinism(c, e2e); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    std::string detail;
    try {
      detail = criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const bool ok = c.passed();
    failed += ok ? 0 : 1;
    std::printf("[%s] %2zu %-20s %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                ok ? detail.c_str() : c.summary().c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
