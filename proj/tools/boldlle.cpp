#include "boldlle/config.hpp"
#include "boldlle/io.hpp"
#include "boldlle/lle.hpp"
#include "boldlle/pipeline.hpp"
#include "boldlle/synthetic.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace boldlle;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = "run";
  std::string manifest;
  std::string method;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (!g.manifest.empty()) cfg.manifest = g.manifest;
  if (!g.method.empty()) {
    cfg.methods.clear();
    std::istringstream in(g.method);
    std::string m;
    while (std::getline(in, m, ',')) cfg.methods.push_back(parse_method(m));
  }
  if (cfg.manifest.empty()) throw std::invalid_argument("no manifest given (--manifest or manifest= in the config)");
  return cfg;
}

ChosenParameters load_params(const std::string& explicit_path, const std::filesystem::path& out, Method m) {
  const auto path = explicit_path.empty() ? out / to_string(m) / "params.txt" : std::filesystem::path(explicit_path);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parameters '" + path.string() + "' (run `train` first)");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_parameters(ss.str());
}

// Runs fn for the stage subcommands; stage failures leave a FAILED marker.
int run_stage(const Globals& g, const std::string& name,
              const std::function<void(const PipelineConfig&, const DatasetManifest&, const Dataset&, RunWriter&)>& fn) {
  const auto cfg = resolve_config(g);
  RunWriter out(g.out);
  try {
    const auto manifest = load_manifest(cfg.manifest);
    const auto data = load_dataset(manifest, cfg);
    fn(cfg, manifest, data, out);
    return 0;
  } catch (const std::exception& e) {
    out.fail(name, e.what());
    std::cerr << "error in stage " << name << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel-neighborhood LLE reconstruction and classification of 4-D BOLD scans"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Configuration file (key=value)");
  app.add_option("--seed", g.seed, "Seed for the split and synthetic data");
  app.add_option("--threads", g.threads, "Worker threads");
  app.add_option("--out", g.out, "Output directory");

  auto* synth = app.add_subcommand("synth", "Write a planted synthetic cohort");
  SyntheticSpec spec;
  std::vector<Index> dims{5, 5, 5, 20};
  std::string name = "synthetic";
  synth->add_option("--dims", dims, "L W H T")->expected(4);
  synth->add_option("--train-patients", spec.train_patients);
  synth->add_option("--train-controls", spec.train_controls);
  synth->add_option("--holdout-patients", spec.holdout_patients);
  synth->add_option("--holdout-controls", spec.holdout_controls);
  synth->add_option("--voxels", spec.planted_voxels, "Planted voxel indices (default: central 2x2x2 block)");
  synth->add_option("--volumes", spec.planted_volumes, "Planted volume indices (default: all)");
  synth->add_option("--effect", spec.effect, "Mean shift in noise sigma units");
  synth->add_option("--sigma", spec.sigma);
  synth->add_option("--name", name, "Dataset name");

  auto* embed = app.add_subcommand("embed", "Reconstruct one scan");
  std::string scan_path, phi_path;
  int radius = 2;
  Index dim = 1;
  embed->add_option("scan", scan_path, "rawvol or .nii file")->required();
  embed->add_option("-r,--radius", radius);
  embed->add_option("-d,--dim", dim)->required();
  embed->add_option("--dump-phi", phi_path, "Write the alignment matrix as triplets");

  auto* sweep_cmd = app.add_subcommand("sweep", "Hyper-parameter sweep on the training partition");
  auto* train_cmd = app.add_subcommand("train", "Sweep, then LOOCV report at the chosen parameters");
  auto* eval_cmd = app.add_subcommand("eval", "Score the holdout partition with trained parameters");
  auto* maps_cmd = app.add_subcommand("maps", "t-maps at the selected volumes over all subjects");
  auto* run_cmd = app.add_subcommand("run", "Full pipeline");
  std::string params_path;
  for (auto* c : {sweep_cmd, train_cmd, eval_cmd, maps_cmd, run_cmd}) {
    c->add_option("--manifest", g.manifest, "Dataset manifest");
    c->add_option("--method", g.method, "lle, pca, original (comma-separated)");
  }
  for (auto* c : {eval_cmd, maps_cmd}) c->add_option("--params", params_path, "Parameters file from `train`");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      spec.dims = {dims[0], dims[1], dims[2], dims[3]};
      PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
      spec.seed = g.seed.value_or(cfg.seed);
      const auto path = write_synthetic(generate_synthetic(spec), g.out, name);
      std::cout << path.string() << '\n';
      return 0;
    }
    if (embed->parsed()) {
      PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
      const auto rc = cfg.reconstruction(Method::lle);
      const auto scan = read_scan(scan_path);
      const auto emb = reconstruct_scan(scan, radius, dim, rc.lle);
      std::filesystem::create_directories(g.out);
      if (!phi_path.empty()) {
        validate_scan(scan);
        const NeighborhoodSpec topo(scan.dims, radius);
        const auto w = compute_weights(scan.samples, topo, dim, rc.lle);
        write_triplets(phi_path, alignment_matrix(w, topo));
      }
      const ScanVolume modes(emb.dims, emb.modes, scan.subject_id + "_lle");
      write_raw_volume(std::filesystem::path(g.out) / (scan.subject_id + "_lle.rawvol"), modes);
      std::cout << "eta=" << format_double(emb.eta) << "\n";
      for (Index k = 0; k < emb.eigenvalues.size(); ++k)
        std::cout << "lambda" << k << '=' << format_double(emb.eigenvalues[k]) << '\n';
      for (const auto& w : emb.warnings) std::cerr << "warning: " << w << '\n';
      return 0;
    }
    if (run_cmd->parsed()) {
      const auto cfg = resolve_config(g);
      const auto res = run_pipeline(cfg.manifest, cfg, g.out);
      if (res.exit_code != 0) std::cerr << "error in stage " << res.failed_stage << ": " << res.message << '\n';
      return res.exit_code;
    }
    if (sweep_cmd->parsed())
      return run_stage(g, "sweep", [](const auto& cfg, const auto& manifest, const auto& data, RunWriter& out) {
        for (Method m : cfg.methods) run_sweep_stage(data, manifest, cfg, m, out);
      });
    if (train_cmd->parsed())
      return run_stage(g, "train", [](const auto& cfg, const auto& manifest, const auto& data, RunWriter& out) {
        for (Method m : cfg.methods) run_train_stage(data, manifest, cfg, m, out);
      });
    if (eval_cmd->parsed())
      return run_stage(g, "eval", [&](const auto& cfg, const auto&, const auto& data, RunWriter& out) {
        for (Method m : cfg.methods) run_eval_stage(data, cfg, load_params(params_path, g.out, m), out);
      });
    if (maps_cmd->parsed())
      return run_stage(g, "maps", [&](const auto& cfg, const auto&, const auto& data, RunWriter& out) {
        for (Method m : cfg.methods) run_maps_stage(data, cfg, load_params(params_path, g.out, m), out);
      });
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
