// robogrid: build grid supervision from robot episodes, split generated grids,
// draw trajectory overlays, evaluate generations, and run the LoRA demo.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "robogrid/robogrid.hpp"

namespace {

using namespace robogrid;
namespace pl = robogrid::pipeline;

std::optional<Size> parse_resize(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) throw InvalidInput("--resize expects HEIGHTxWIDTH, got '" + text + "'");
  try {
    return Size{std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
  } catch (const std::exception&) {
    throw InvalidInput("--resize expects HEIGHTxWIDTH, got '" + text + "'");
  }
}

struct RampFlags {
  std::string start;
  std::string end;
  std::optional<int> stroke_width;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--traj-color-start", start, "Ramp color of the first segment (hex RGB, default #0000ff)");
    cmd->add_option("--traj-color-end", end, "Ramp color of the last segment (hex RGB, default #ff0000)");
    cmd->add_option("--stroke-width", stroke_width, "Path stroke width in pixels (default 3)");
  }

  void apply(ColorRamp& ramp) const {
    if (!start.empty()) ramp.start = parse_hex_color(start);
    if (!end.empty()) ramp.end = parse_hex_color(end);
    if (stroke_width) ramp.stroke_width = *stroke_width;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robogrid: 3x3 grid supervision and evaluation for robot manipulation video"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--jobs", jobs, "Episode-level worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed (overrides config)");
  app.add_flag("--verbose", verbose, "Print the effective configuration");

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "Build supervision pairs from a dataset root");
  std::string dataset_root, output_root, branch, resize, prompt_template;
  std::optional<int> frames;
  RampFlags synth_ramp;
  synth->add_option("--dataset-root", dataset_root, "Directory containing episodes/*.json");
  synth->add_option("--output-root", output_root, "Output directory");
  synth->add_option("--branch", branch, "text | trajectory | both");
  synth->add_option("--frames", frames, "Frames sampled per episode (must be 9 for grids)");
  synth->add_option("--resize", resize, "Resize every frame to HEIGHTxWIDTH");
  synth->add_option("--prompt-template", prompt_template, "Prompt template with one {} placeholder");
  synth_ramp.add_to(synth);

  // split
  auto* split = app.add_subcommand("split", "Split a grid PNG into frame_1.png .. frame_9.png");
  std::string split_grid, split_out;
  split->add_option("grid", split_grid, "Grid PNG")->required();
  split->add_option("output_dir", split_out, "Output directory")->required();

  // overlay
  auto* overlay = app.add_subcommand("overlay", "Draw a trajectory over a frame");
  std::string ov_frame, ov_traj, ov_out;
  RampFlags ov_ramp;
  overlay->add_option("frame", ov_frame, "Input frame PNG")->required();
  overlay->add_option("trajectory", ov_traj, "Trajectory JSON ([[x, y], ...])")->required();
  overlay->add_option("output", ov_out, "Output PNG")->required();
  ov_ramp.add_to(overlay);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted episodes against ground truth");
  pl::EvaluateOptions eval_opt;
  std::string pred_dir, gt_dir, real_feat, gen_feat, labels, report_out, table_out, table_style = "main";
  evaluate->add_option("--pred", pred_dir, "Predicted episodes directory")->required();
  evaluate->add_option("--gt", gt_dir, "Ground-truth episodes directory")->required();
  evaluate->add_option("--real-features", real_feat, "FVDF features of real clips");
  evaluate->add_option("--gen-features", gen_feat, "FVDF features of generated clips");
  evaluate->add_option("--labels", labels, "Success labels (JSON lines)");
  evaluate->add_option("--out", report_out, "Report JSON path")->required();
  evaluate->add_option("--table", table_out, "Also write an aligned text table");
  evaluate->add_option("--table-style", table_style, "main | ablation")
      ->check(CLI::IsMember({"main", "ablation"}));
  evaluate->add_option("--dataset", eval_opt.dataset, "Dataset name for the report");
  evaluate->add_option("--method", eval_opt.method, "Method / configuration name for the report");

  // lora-demo
  auto* demo = app.add_subcommand("lora-demo", "Check LoRA algebra on a toy attention block");
  pl::LoraDemoOptions demo_opt;
  std::string demo_out;
  demo->add_option("--d-model", demo_opt.d_model, "Model width")->check(CLI::PositiveNumber);
  demo->add_option("--d-ff", demo_opt.d_ff, "Feed-forward width")->check(CLI::PositiveNumber);
  demo->add_option("--rank", demo_opt.rank, "Adapter rank")->check(CLI::PositiveNumber);
  demo->add_option("--alpha", demo_opt.alpha, "Adapter scale");
  demo->add_option("--trials", demo_opt.trials, "Random trials")->check(CLI::PositiveNumber);
  demo->add_option("--out", demo_out, "Write the JSON report here instead of stdout");

  // validate
  auto* validate = app.add_subcommand("validate", "Check every manifest under a dataset root");
  std::string validate_root;
  validate->add_option("dataset_root", validate_root, "Dataset root (defaults to the config's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pl::kExitFatal;
  }

  try {
    pl::RunConfig cfg;
    if (!config_path.empty()) cfg = pl::read_config(config_path);
    if (seed) cfg.seed = *seed;

    if (*synth) {
      if (!dataset_root.empty()) cfg.dataset_root = dataset_root;
      if (!output_root.empty()) cfg.output_root = output_root;
      if (!branch.empty()) cfg.branch = pl::branch_from_string(branch);
      if (frames) cfg.sampling.target_count = *frames;
      if (!resize.empty()) cfg.sampling.resize_to = parse_resize(resize);
      if (!prompt_template.empty()) cfg.prompt_template = prompt_template;
      synth_ramp.apply(cfg.ramp);
      if (cfg.dataset_root.empty() || cfg.output_root.empty()) {
        std::cerr << "fatal: synthesize needs dataset_root and output_root (config or flags)\n";
        return pl::kExitFatal;
      }
      if (verbose) std::cerr << pl::config_to_json(cfg).dump(2) << "\n";
      return pl::cmd_synthesize(cfg, jobs, std::cerr).exit_code;
    }
    if (*split) return pl::cmd_split(split_grid, split_out, std::cerr);
    if (*overlay) {
      ColorRamp ramp = cfg.ramp;
      ov_ramp.apply(ramp);
      return pl::cmd_overlay(ov_frame, ov_traj, ov_out, ramp, std::cerr);
    }
    if (*evaluate) {
      eval_opt.pred_dir = pred_dir;
      eval_opt.gt_dir = gt_dir;
      if (!real_feat.empty()) eval_opt.real_features = real_feat;
      if (!gen_feat.empty()) eval_opt.gen_features = gen_feat;
      if (!labels.empty()) eval_opt.labels = labels;
      eval_opt.report_path = report_out;
      if (!table_out.empty()) eval_opt.table_path = table_out;
      eval_opt.ablation_table = table_style == "ablation";
      eval_opt.metrics = cfg.metrics;
      return pl::cmd_evaluate(eval_opt, jobs, std::cerr);
    }
    if (*demo) {
      demo_opt.seed = cfg.seed;
      const std::string text = pl::lora_demo(demo_opt).dump(2) + "\n";
      if (demo_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(demo_out, std::ios::binary) << text;
      }
      return pl::kExitOk;
    }
    if (*validate) {
      const std::filesystem::path root = validate_root.empty() ? cfg.dataset_root : std::filesystem::path(validate_root);
      if (root.empty()) {
        std::cerr << "fatal: validate needs a dataset root\n";
        return pl::kExitFatal;
      }
      return pl::cmd_validate(root, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return pl::kExitFatal;
  }
  return pl::kExitFatal;
}
