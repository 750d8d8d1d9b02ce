// meshattn command-line entry point. Every command is deterministic given
// its input files, config and --seed.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "meshattn/fixtures.hpp"
#include "meshattn/fusion_net.hpp"
#include "meshattn/io.hpp"
#include "meshattn/metrics.hpp"
#include "meshattn/scanpath.hpp"
#include "meshattn/scanpath_rl.hpp"
#include "meshattn/synthetic.hpp"
#include "meshattn/unproject.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace meshattn;
using meshattn::cli::RunConfig;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

int exit_code(const Error& e) {
  const std::string& k = e.kind();
  if (k == "InvalidArgument") return kUsage;
  if (k == "NonFiniteLoss" || k == "NonFinite" || k == "ZeroVariance") return kNumeric;
  return kData;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void emit_json(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_text(out, text);
}

json number_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// One `mesh featb smap` triple per line; relative paths resolve against
/// the manifest's directory.
std::vector<FusionSample> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  std::vector<FusionSample> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::istringstream fields(line);
    std::string mesh, feat, smap, extra;
    if (!(fields >> mesh) || mesh[0] == '#') continue;
    if (!(fields >> feat >> smap) || (fields >> extra))
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected 'mesh featb smap'");
    FusionSample s{load_mesh(resolve(mesh)), load_featb(resolve(feat)),
                   load_saliency(resolve(smap))};
    if (s.features.n() != s.mesh.num_vertices() || s.gt.size() != s.mesh.num_vertices())
      throw LengthMismatch(path.string() + ":" + std::to_string(lineno) +
                           ": features or saliency do not match the mesh");
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ParseError("manifest '" + path.string() + "' lists no meshes");
  return out;
}

struct FixtureArgs {
  std::string kind;
  int subdiv = 2;
  double amplitude = 0.12;
  double major = 1.0, minor = 0.35;
  int nu = 24, nv = 12;
};

Mesh make_fixture(const FixtureArgs& a, std::uint64_t seed) {
  const std::string& kind = a.kind;
  if (kind == "cube") return fixtures::cube();
  if (kind == "icosphere") return fixtures::icosphere(a.subdiv);
  if (kind == "torus") return fixtures::torus(a.major, a.minor, a.nu, a.nv);
  if (kind == "bumpy") return fixtures::bumpy_sphere(a.subdiv, a.amplitude, seed);
  throw InvalidArgument("unknown fixture '" + kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshattn: mesh saliency, feature transfer and scanpath tools"};
  app.require_subcommand(1);

  RunConfig config;
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool print_config = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "key=value config file");
    sub->add_option("--set", overrides, "override one key (key=value), repeatable");
    sub->add_option("--seed", seed, "seed for every random stage");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
  };

  // fixture
  FixtureArgs fx;
  std::string fx_out;
  auto* fixture = app.add_subcommand("fixture", "write a deterministic test mesh");
  fixture->add_option("kind", fx.kind, "cube | icosphere | torus | bumpy")->required();
  fixture->add_option("--subdiv", fx.subdiv, "icosphere subdivisions");
  fixture->add_option("--amplitude", fx.amplitude, "bumpy-sphere radius modulation");
  fixture->add_option("--major", fx.major, "torus major radius");
  fixture->add_option("--minor", fx.minor, "torus minor radius");
  fixture->add_option("--nu", fx.nu, "torus segments around the axis");
  fixture->add_option("--nv", fx.nv, "torus segments around the tube");
  fixture->add_option("-o,--out", fx_out, "output mesh (.off, .obj, .ply)")->required();
  common(fixture);

  // evaluate
  std::string ev_mesh, ev_gt, ev_pred, ev_fix, ev_out;
  auto* evaluate = app.add_subcommand("evaluate", "saliency metrics as JSON");
  evaluate->add_option("--mesh", ev_mesh, "mesh the maps refer to");
  evaluate->add_option("--gt", ev_gt, "ground-truth saliency")->required();
  evaluate->add_option("--pred", ev_pred, "predicted saliency")->required();
  evaluate->add_option("--fixations", ev_fix, "fixated vertex list");
  evaluate->add_option("-o,--out", ev_out, "report path (stdout if omitted)");
  common(evaluate);

  // synth-features
  std::string sf_mesh, sf_mode = "planted", sf_out, sf_gt;
  float sf_value = 1.0f;
  auto* synth = app.add_subcommand("synth-features", "synthetic per-vertex features");
  synth->add_option("--mesh", sf_mesh)->required();
  synth->add_option("--mode", sf_mode, "planted | constant");
  synth->add_option("--value", sf_value, "value for constant mode");
  synth->add_option("-o,--out", sf_out, "output .featb")->required();
  synth->add_option("--gt-out", sf_gt, "planted mode: also write the ground truth saliency");
  common(synth);

  // unproject
  std::string up_mesh, up_views, up_out;
  auto* unproject = app.add_subcommand("unproject", "multi-view feature transfer to vertices");
  unproject->add_option("--mesh", up_mesh)->required();
  unproject->add_option("--views", up_views, "directory of per-view .pxf features (synthetic if omitted)")
      ;
  unproject->add_option("-o,--out", up_out, "output .featb")->required();
  common(unproject);

  // train-fusion
  std::string tf_manifest, tf_out, tf_curve;
  auto* train_fusion_cmd = app.add_subcommand("train-fusion", "train the saliency network");
  train_fusion_cmd->add_option("--manifest", tf_manifest, "lines of 'mesh featb smap'")
      ->required();
  train_fusion_cmd->add_option("-o,--out", tf_out, "checkpoint path")->required();
  train_fusion_cmd->add_option("--curve", tf_curve, "loss curve CSV");
  common(train_fusion_cmd);

  // predict
  std::string pr_mesh, pr_feat, pr_ckpt, pr_out;
  auto* predict_cmd = app.add_subcommand("predict", "per-vertex saliency from a checkpoint");
  predict_cmd->add_option("--mesh", pr_mesh)->required();
  predict_cmd->add_option("--features", pr_feat, ".featb")->required();
  predict_cmd->add_option("--checkpoint", pr_ckpt)->required();
  predict_cmd->add_option("-o,--out", pr_out, "output saliency")->required();
  common(predict_cmd);

  // train-scanpath
  std::string ts_mesh, ts_sal, ts_out, ts_curve;
  auto* train_scan = app.add_subcommand("train-scanpath", "train the scanpath policy");
  train_scan->add_option("--mesh", ts_mesh)->required();
  train_scan->add_option("--saliency", ts_sal)->required();
  train_scan->add_option("-o,--out", ts_out, "policy checkpoint")->required();
  train_scan->add_option("--curve", ts_curve, "learning curve CSV");
  common(train_scan);

  // gen-scanpath
  std::string gs_mesh, gs_sal, gs_policy, gs_dir;
  Index gs_n = 1;
  bool gs_det = false;
  auto* gen_scan = app.add_subcommand("gen-scanpath", "generate scanpath JSON files");
  gen_scan->add_option("--mesh", gs_mesh)->required();
  gen_scan->add_option("--saliency", gs_sal)->required();
  gen_scan->add_option("--policy", gs_policy)->required();
  gen_scan->add_option("-n", gs_n, "number of scanpaths")->check(CLI::PositiveNumber);
  gen_scan->add_option("--out-dir", gs_dir)->required();
  gen_scan->add_flag("--deterministic", gs_det, "most probable action at every step");
  common(gen_scan);

  // multimatch
  std::string mm_a, mm_b, mm_mesh, mm_out;
  auto* mm = app.add_subcommand("multimatch", "five-dimension scanpath similarity");
  mm->add_option("a", mm_a)->required();
  mm->add_option("b", mm_b)->required();
  mm->add_option("--mesh", mm_mesh, "mesh for the diagonal (default: the one named in a)")
      ;
  mm->add_option("-o,--out", mm_out, "report path (stdout if omitted)");
  common(mm);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: Usage: %s\n", e.what());
    return kUsage;
  }

  try {
    if (!config_file.empty()) cli::load_config_file(config, config_file);
    for (const auto& o : overrides) cli::apply_assignment(config, o);
    if (seed) config.seed = *seed;
    config.propagate_seed();
    if (print_config) {
      std::cout << cli::format_config(config);
      return kOk;
    }

    if (fixture->parsed()) {
      save_mesh(make_fixture(fx, config.seed), fx_out);
    } else if (evaluate->parsed()) {
      const SaliencyMap gt = load_saliency(ev_gt), pred = load_saliency(ev_pred);
      if (!ev_mesh.empty()) {
        const Mesh mesh = load_mesh(ev_mesh);
        if (gt.size() != mesh.num_vertices())
          throw LengthMismatch("saliency length differs from the mesh vertex count");
      }
      std::optional<double> nss_v, auc_v;
      if (!ev_fix.empty()) {
        const FixationSet fix = load_fixations(ev_fix);
        detail::check_same_length(pred.values, gt.size());
        nss_v = nss(pred.values, fix);
        auc_v = auc_judd(pred.values, fix);
      }
      json report;
      report["kl"] = kl_div(gt.values, pred.values);
      report["cc"] = cc(gt.values, pred.values);
      report["nss"] = number_or_null(nss_v);
      report["auc"] = number_or_null(auc_v);
      report["mse"] = mse(gt.values, pred.values);
      emit_json(report, ev_out);
    } else if (synth->parsed()) {
      const Mesh mesh = load_mesh(sf_mesh);
      if (sf_mode == "planted") {
        const PlantedTask task = make_planted_task(mesh, config.planted);
        save_featb(task.features, sf_out);
        if (!sf_gt.empty()) save_saliency(task.gt, sf_gt);
      } else if (sf_mode == "constant") {
        save_featb(constant_features(mesh.num_vertices(), config.planted.sem_dim, sf_value), sf_out);
      } else {
        throw InvalidArgument("unknown feature mode '" + sf_mode + "'");
      }
    } else if (unproject->parsed()) {
      const Mesh mesh = load_mesh(up_mesh);
      PixelFeatureSource source;
      if (up_views.empty()) {
        source = [&](std::size_t, const ViewProjection& v) { return config.pixels(mesh, v); };
      } else {
        source = [&](std::size_t view, const ViewProjection&) {
          return load_view_features(up_views, view, config.pixels.alpha, config.pixels.selection);
        };
      }
      save_featb(unproject_mesh(mesh, config.unproject, source), up_out);
    } else if (train_fusion_cmd->parsed()) {
      const auto data = load_manifest(tf_manifest);
      const FusionTrainResult r = train_fusion(data, config.arch, config.train, [](const EpochStats& e) {
        std::fprintf(stderr, "epoch %lld loss %.6f kl %.6f cc %.6f\n", (long long)e.epoch, e.loss,
                     e.kl, e.cc);
      });
      save_fusion_checkpoint(r.params, config.train, tf_out);
      if (!tf_curve.empty()) save_loss_curve(r.curve, tf_curve);
    } else if (predict_cmd->parsed()) {
      const Mesh mesh = load_mesh(pr_mesh);
      const FusionParams<float> params = load_fusion_checkpoint(pr_ckpt);
      save_saliency(predict(mesh, load_featb(pr_feat), params, config.predict_m, config.seed), pr_out);
    } else if (train_scan->parsed()) {
      const Mesh mesh = load_mesh(ts_mesh);
      const ScanpathTrainResult r =
          train_scanpath(mesh, load_saliency(ts_sal), config.ppo, config.reward,
                         [](const RolloutStats& s) {
                           std::fprintf(stderr, "timestep %lld return %.4f entropy %.4f\n",
                                        (long long)s.timestep, s.mean_return, s.entropy);
                         });
      save_policy_checkpoint(r.params, config.ppo, config.reward, ts_out);
      if (!ts_curve.empty()) save_scanpath_curve(r.curve, ts_curve);
    } else if (gen_scan->parsed()) {
      const Mesh mesh = load_mesh(gs_mesh);
      const SaliencyMap sal = load_saliency(gs_sal);
      const PolicyParams policy = load_policy_checkpoint(gs_policy);
      fs::create_directories(gs_dir);
      for (Index i = 0; i < gs_n; ++i) {
        Scanpath path = generate_scanpath(mesh, sal, policy, gs_det,
                                          Rng::mix(config.seed, std::uint64_t(i)),
                                          config.ppo.start, config.reward);
        path.mesh = gs_mesh;
        char name[48];
        std::snprintf(name, sizeof name, "scanpath_%03lld.json", (long long)i);
        save_scanpath(path, fs::path(gs_dir) / name);
      }
    } else if (mm->parsed()) {
      const Scanpath a = load_scanpath(mm_a), b = load_scanpath(mm_b);
      const std::string mesh_path = mm_mesh.empty() ? a.mesh : mm_mesh;
      if (mesh_path.empty()) throw InvalidArgument("no mesh given and scanpath names none");
      const MultiMatchScore s = multimatch(a, b, load_mesh(mesh_path).bbox_diagonal());
      json report;
      report["shape"] = s.shape;
      report["direction"] = s.direction;
      report["length"] = s.length;
      report["position"] = s.position;
      report["duration"] = s.duration;
      report["mean"] = s.mean();
      emit_json(report, mm_out);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: IoError: %s\n", e.what());
    return kData;
  }
  return kOk;
}
