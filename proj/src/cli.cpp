#include "roa/cli.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "roa/certified.hpp"
#include "roa/dynamics.hpp"
#include "roa/errors.hpp"

#ifndef ROA_VERSION
#define ROA_VERSION "dev"
#endif

namespace roa::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(const std::string& kind) {
  static const std::map<std::string, int> codes{
      {"ParseError", kParse},
      {"EquilibriumError", kEquilibrium},
      {"TopologyError", kTopology},
      {"DimensionError", kDimension},
      {"NonFiniteError", kNonFinite},
      {"NotConvergedError", kNotConverged},
      {"DegenerateTrajectoryError", kDegenerateTrajectory},
      {"NotHurwitzError", kNotHurwitz},
      {"FactorizationError", kFactorization},
      {"EmptyDomainError", kEmptyDomain},
      {"BudgetExhaustedError", kBudgetExhausted},
      {"CertificateVoidError", kCertificateVoid},
      {"IndexError", kIndex},
      {"ConsistencyError", kConsistency},
      {"ConfigError", kConfig},
  };
  const auto it = codes.find(kind);
  return it == codes.end() ? kInternal : it->second;
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) parts.push_back(part);
  return parts;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto bits = split(text, ':');
  if (bits.size() != 2) throw ConfigError("range '" + text + "' is not of the form lo:hi");
  try {
    std::size_t used = 0;
    const double lo = std::stod(bits[0], &used);
    if (used != bits[0].size()) throw std::invalid_argument(bits[0]);
    const double hi = std::stod(bits[1], &used);
    if (used != bits[1].size()) throw std::invalid_argument(bits[1]);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError("range '" + text + "' has a non-numeric bound");
  }
}

Box broadcast_box(const std::vector<double>& lower, const std::vector<double>& upper,
                  int state_dim) {
  if (lower.size() != upper.size()) throw DimensionError("box lower/upper sizes differ");
  Box box{Eigen::VectorXd(state_dim), Eigen::VectorXd(state_dim)};
  if (static_cast<int>(lower.size()) == state_dim) {
    for (int i = 0; i < state_dim; ++i) {
      box.lower[i] = lower[i];
      box.upper[i] = upper[i];
    }
  } else if (lower.size() == 2 && state_dim % 2 == 0) {
    const int m = state_dim / 2;
    for (int k = 0; k < m; ++k) {
      box.lower[k] = lower[0];
      box.upper[k] = upper[0];
      box.lower[m + k] = lower[1];
      box.upper[m + k] = upper[1];
    }
  } else {
    throw DimensionError("box has " + std::to_string(lower.size()) +
                         " ranges for a state of dimension " + std::to_string(state_dim));
  }
  box.validate();
  return box;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

/// Everything a region or volume command needs from a finished run.
struct RunArtifacts {
  GpModel checkpoint{Kernel::squared_exponential(), 1.0, 1};
  CheckpointMeta meta;
  std::vector<SamplingRecord> records;
  std::optional<PowerSystem> system;
  std::optional<ExperimentConfig> config;
};

RunArtifacts load_artifacts(const std::optional<fs::path>& manifest_path,
                            std::optional<fs::path> model, std::optional<fs::path> records,
                            const std::optional<fs::path>& system) {
  RunArtifacts a;
  if (manifest_path) {
    const json manifest = read_json(*manifest_path);
    const fs::path base = manifest_path->parent_path();
    try {
      const auto& artifacts = manifest.at("artifacts");
      if (!model) model = base / artifacts.at("model").get<std::string>();
      if (!records) records = base / artifacts.at("records").get<std::string>();
      if (!system) a.system.emplace(parse_system(manifest.at("system").dump()));
      a.config = parse_experiment_config(manifest.at("config"));
    } catch (const json::exception& e) {
      throw ParseError("malformed manifest: " + std::string(e.what()));
    }
  }
  if (!model || !records) throw ConfigError("need --model and --records, or --manifest");
  if (system) a.system.emplace(load_system(*system));

  a.checkpoint = model_from_json(read_json(*model), &a.meta);
  std::ifstream in(*records);
  if (!in) throw ParseError("cannot open " + records->string());
  a.records = read_records_csv(in);

  // The checkpoint must be the model fitted on exactly the stable records.
  std::vector<const SamplingRecord*> stable;
  for (const auto& r : a.records) {
    if (r.stable) stable.push_back(&r);
  }
  if (static_cast<int>(stable.size()) != a.checkpoint.size()) {
    throw ConsistencyError("records hold " + std::to_string(stable.size()) +
                           " stable samples but the checkpoint holds " +
                           std::to_string(a.checkpoint.size()));
  }
  for (std::size_t i = 0; i < stable.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const double v = a.checkpoint.observations()[col];
    const bool same_point =
        stable[i]->point.size() == a.checkpoint.input_dim() &&
        (stable[i]->point - a.checkpoint.inputs().col(col)).norm() <=
            1e-9 * (1.0 + stable[i]->point.norm());
    if (!same_point || std::abs(*stable[i]->v_hat - v) > 1e-9 * (1.0 + std::abs(v))) {
      throw ConsistencyError("record " + std::to_string(i) + " differs from the checkpoint");
    }
  }
  return a;
}

ConfidenceRegionSpec spec_for(const RunArtifacts& a, RegionMode mode) {
  OffsetFunction v_star;
  if (mode == RegionMode::Offset) {
    if (!a.system) throw ConfigError("offset mode needs the system (--system or --manifest)");
    const PowerSystem sys = *a.system;
    v_star = [sys](const Eigen::Ref<const Eigen::VectorXd>& x) { return energy_v_star(sys, x); };
  }
  return confidence_spec_from_run(a.records, a.checkpoint.kernel(), a.checkpoint.noise_sigma(),
                                  a.meta, mode, std::move(v_star));
}

RegionMode resolve_mode(const std::optional<std::string>& flag, const RunArtifacts& a) {
  if (flag) return parse_mode(*flag);
  return a.config ? a.config->region.mode : RegionMode::Equilibrium;
}

Box resolve_box(const std::optional<std::string>& flag, const RunArtifacts& a, int dim) {
  if (flag) return parse_box(*flag, dim);
  if (a.config && a.config->box_lower) return a.config->box(dim);
  throw ConfigError("no box given (--box, or a manifest whose config has one)");
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Box parse_box(const std::string& text, int state_dim) {
  std::vector<double> lower, upper;
  for (const auto& part : split(text, ',')) {
    const auto [lo, hi] = parse_range(part);
    lower.push_back(lo);
    upper.push_back(hi);
  }
  return broadcast_box(lower, upper, state_dim);
}

std::vector<std::pair<int, int>> parse_planes(const std::string& text) {
  std::vector<std::pair<int, int>> planes;
  for (const auto& part : split(text, ',')) {
    const auto bits = split(part, ':');
    if (bits.size() != 2) throw ConfigError("plane '" + part + "' is not of the form a:b");
    try {
      planes.emplace_back(std::stoi(bits[0]), std::stoi(bits[1]));
    } catch (const std::logic_error&) {
      throw ConfigError("plane '" + part + "' has a non-integer index");
    }
  }
  return planes;
}

RegionMode parse_mode(const std::string& text) {
  if (text == "equilibrium") return RegionMode::Equilibrium;
  if (text == "offset") return RegionMode::Offset;
  throw ConfigError("region mode must be 'equilibrium' or 'offset', got '" + text + "'");
}

std::string mode_name(RegionMode mode) {
  return mode == RegionMode::Offset ? "offset" : "equilibrium";
}

Box ExperimentConfig::box(int state_dim) const {
  if (!box_lower || !box_upper) throw ConfigError("config has no box");
  return broadcast_box(*box_lower, *box_upper, state_dim);
}

ExperimentConfig parse_experiment_config(const json& j) {
  check_keys(j, {"description", "sampler", "box", "region"}, "experiment config");
  ExperimentConfig cfg;
  try {
    if (j.contains("sampler")) cfg.sampler = config_from_json(j.at("sampler"));
    if (j.contains("box")) {
      const auto& b = j.at("box");
      check_keys(b, {"lower", "upper", "exclusion_radius"}, "box");
      cfg.box_lower = b.at("lower").get<std::vector<double>>();
      cfg.box_upper = b.at("upper").get<std::vector<double>>();
      if (cfg.box_lower->size() != cfg.box_upper->size()) {
        throw ConfigError("box lower/upper sizes differ");
      }
      if (b.contains("exclusion_radius") && !b.at("exclusion_radius").is_null()) {
        cfg.exclusion_radius = b.at("exclusion_radius").get<double>();
        if (!(*cfg.exclusion_radius >= 0.0)) throw ConfigError("exclusion_radius must be >= 0");
      }
    }
    if (j.contains("region")) {
      const auto& r = j.at("region");
      check_keys(r, {"mode", "resolution", "volume_samples"}, "region");
      if (r.contains("mode")) cfg.region.mode = parse_mode(r.at("mode").get<std::string>());
      if (r.contains("resolution")) {
        const auto res = r.at("resolution").get<std::vector<int>>();
        if (res.size() != 2) throw ConfigError("region.resolution needs two entries");
        cfg.region.resolution = {res[0], res[1]};
      }
      cfg.region.volume_samples = r.value("volume_samples", cfg.region.volume_samples);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return parse_experiment_config(read_json(path));
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j{{"sampler", config_to_json(cfg.sampler)},
         {"region",
          {{"mode", mode_name(cfg.region.mode)},
           {"resolution", {cfg.region.resolution[0], cfg.region.resolution[1]}},
           {"volume_samples", cfg.region.volume_samples}}}};
  if (cfg.box_lower) {
    j["box"] = {{"lower", *cfg.box_lower}, {"upper", *cfg.box_upper}};
    if (cfg.exclusion_radius) j["box"]["exclusion_radius"] = *cfg.exclusion_radius;
  }
  return j;
}

void cmd_sample(const SampleOptions& opt, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();

  std::optional<PowerSystem> sys;
  ExperimentConfig cfg;
  if (opt.manifest) {
    const json manifest = read_json(*opt.manifest);
    try {
      if (!opt.system) sys.emplace(parse_system(manifest.at("system").dump()));
      if (!opt.config) cfg = parse_experiment_config(manifest.at("config"));
    } catch (const json::exception& e) {
      throw ParseError("malformed manifest: " + std::string(e.what()));
    }
  }
  if (opt.system) sys.emplace(load_system(*opt.system));
  if (opt.config) cfg = load_experiment_config(*opt.config);
  if (!sys) throw ConfigError("need --system or --manifest");
  if (!opt.config && !opt.manifest) throw ConfigError("need --config or --manifest");

  const int dim = sys->dimension();
  if (opt.seed) cfg.sampler.seed = *opt.seed;
  const Box box = opt.box ? parse_box(*opt.box, dim) : cfg.box(dim);
  cfg.box_lower = to_std(box.lower);
  cfg.box_upper = to_std(box.upper);
  cfg.sampler.validate();

  SamplingDomain domain = SamplingDomain::box(box.lower, box.upper);
  if (cfg.exclusion_radius) domain.exclusion_radius = *cfg.exclusion_radius;

  UcbOptions uo;
  if (cfg.sampler.early_exit) {
    try {
      const CertifiedRoa roa = build_certified(*sys);
      uo.certified = [roa](const Eigen::Ref<const Eigen::VectorXd>& x) { return roa.contains(x); };
    } catch (const CertificateVoidError&) {
      log << "warning: no certified region for this system; early exit disabled\n";
    }
  }
  int stable_seen = 0;
  if (!opt.quiet) {
    uo.on_record = [&](const SamplingRecord& r) {
      if (!r.stable) return;
      ++stable_seen;
      log << "stable " << stable_seen << '/' << cfg.sampler.target_stable << " at iteration "
          << r.iteration << ", V_hat " << *r.v_hat << '\n';
    };
  }

  const UcbResult result = run_gp_ucb(*sys, domain, cfg.sampler, uo);

  fs::create_directories(opt.out_dir);
  {
    auto out = open_output(opt.out_dir / "records.csv");
    write_records_csv(out, result.records);
  }
  {
    auto out = open_output(opt.out_dir / "model.json");
    out << model_to_json(result.model, cfg.sampler.checkpoint_meta()).dump(2) << '\n';
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"command", "sample"},
                {"version", ROA_VERSION},
                {"seed", cfg.sampler.seed},
                {"system", json::parse(system_to_json(*sys))},
                {"config", experiment_config_to_json(cfg)},
                {"artifacts", {{"records", "records.csv"}, {"model", "model.json"}}},
                {"summary",
                 {{"stable_samples", result.model.size()},
                  {"total_iterations", result.total_iterations},
                  {"noise_sigma", result.noise_sigma},
                  {"final_beta", result.final_beta},
                  {"c_max", result.c_max}}},
                {"duration_seconds", seconds}};
  {
    auto out = open_output(opt.out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
  log << "wrote " << result.model.size() << " stable samples (" << result.total_iterations
      << " iterations) to " << opt.out_dir.string() << '\n';
}

void cmd_region(const RegionOptions& opt, std::ostream& out) {
  const RunArtifacts a = load_artifacts(opt.manifest, opt.model, opt.records, opt.system);
  const RegionMode mode = resolve_mode(opt.mode, a);
  const ConfidenceRegionSpec spec = spec_for(a, mode);
  const int dim = spec.model.input_dim();
  const Box box = resolve_box(opt.box, a, dim);
  const std::array<int, 2> resolution =
      opt.resolution ? *opt.resolution
                     : (a.config ? a.config->region.resolution : std::array<int, 2>{200, 200});
  std::vector<std::pair<int, int>> planes;
  if (opt.planes) {
    planes = parse_planes(*opt.planes);
  } else if (dim == 2) {
    planes = {{0, 1}};
  } else {
    planes = machine_planes(dim);
  }

  const auto slices = project_slices(spec, planes, box, resolution);

  std::optional<CertifiedRoa> certified;
  if (a.system) {
    try {
      certified = build_certified(*a.system);
    } catch (const CertificateVoidError&) {
      out << "warning: no certified region for this system; no boundary overlay\n";
    }
  }

  fs::create_directories(opt.out_dir);
  json listing = json::array();
  for (const auto& grid : slices) {
    const std::string tag = std::to_string(grid.axis_x) + "_" + std::to_string(grid.axis_y);
    const std::string grid_file = dim == 2 ? "grid.csv" : "slice_" + tag + ".csv";
    {
      auto f = open_output(opt.out_dir / grid_file);
      write_grid_csv(f, grid);
    }
    const auto [ox, oy] = grid.anchor_cell();
    json entry{{"plane", {grid.axis_x, grid.axis_y}},
               {"fixed_value", 0.0},
               {"grid", grid_file},
               {"member_fraction", grid.member_fraction()},
               {"origin_member", grid.member[grid.index(ox, oy)] != 0}};
    if (certified) {
      const std::string boundary_file = dim == 2 ? "boundary.csv" : "boundary_" + tag + ".csv";
      auto f = open_output(opt.out_dir / boundary_file);
      write_boundary_csv(f, certified->boundary(grid.axis_x, grid.axis_y));
      entry["boundary"] = boundary_file;
    }
    listing.push_back(entry);
    out << "plane (" << grid.axis_x << ", " << grid.axis_y
        << ") member_fraction=" << grid.member_fraction() << '\n';
  }
  json manifest{{"mode", mode_name(mode)},
                {"c_max", spec.c_max},
                {"beta", spec.beta},
                {"model_points", spec.model.size()},
                {"resolution", {resolution[0], resolution[1]}},
                {"box", {{"lower", to_std(box.lower)}, {"upper", to_std(box.upper)}}},
                {"slices", listing}};
  {
    auto f = open_output(opt.out_dir / "slices.json");
    f << manifest.dump(2) << '\n';
  }
  out << "c_max=" << spec.c_max << " beta=" << spec.beta << '\n';
}

void cmd_volume(const VolumeOptions& opt, std::ostream& out) {
  const RunArtifacts a = load_artifacts(opt.manifest, opt.model, opt.records, opt.system);
  if (!a.system) throw ConfigError("volume needs the system (--system or --manifest)");
  const RegionMode mode = resolve_mode(opt.mode, a);
  const ConfidenceRegionSpec spec = spec_for(a, mode);
  const Box box = resolve_box(opt.box, a, spec.model.input_dim());
  const std::int64_t samples =
      opt.samples ? *opt.samples : (a.config ? a.config->region.volume_samples : 100000);
  const CertifiedRoa certified = build_certified(*a.system);

  json j = volume_ratio(spec, certified, box, samples, opt.seed).to_json();
  j["mode"] = mode_name(mode);
  j["seed"] = opt.seed;
  j["c_max"] = spec.c_max;
  j["beta"] = spec.beta;
  out << j.dump() << '\n';
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probabilistic region-of-attraction estimation for swing-equation networks", "roa"};
  app.set_version_flag("--version", std::string(ROA_VERSION));
  app.require_subcommand(1);

  SampleOptions sample;
  std::string system, config, out_dir, box, manifest;
  std::uint64_t seed = 0;
  auto* s = app.add_subcommand("sample", "Run GP-UCB sampling and write records, model and manifest");
  s->add_option("--system", system, "System description JSON");
  s->add_option("--config", config, "Experiment config JSON");
  s->add_option("--manifest", manifest, "Rerun from a previous manifest");
  s->add_option("--out", out_dir, "Output directory")->required();
  s->add_option("--seed", seed, "Override the sampler seed");
  s->add_option("--box", box, "Sampling box lo:hi,... (two ranges broadcast over machines)");
  s->add_flag("--quiet", sample.quiet, "Only print the final summary");

  std::string model, records, mode, planes;
  std::vector<int> resolution;
  std::int64_t n_samples = 0;
  auto* r = app.add_subcommand("region", "Rasterize the confidence region on 2-D slices");
  auto* v = app.add_subcommand("volume", "Monte Carlo volume ratio against the certified region");
  for (auto* sub : {r, v}) {
    sub->add_option("--manifest", manifest, "Manifest of a sample run");
    sub->add_option("--model", model, "Model checkpoint JSON");
    sub->add_option("--records", records, "Records CSV");
    sub->add_option("--system", system, "System description JSON");
    sub->add_option("--mode", mode, "equilibrium or offset")
        ->check(CLI::IsMember({"equilibrium", "offset"}));
    sub->add_option("--box", box, "Box lo:hi,... (two ranges broadcast over machines)");
  }
  r->add_option("--out", out_dir, "Output directory")->required();
  r->add_option("--resolution", resolution, "Cells per axis, one or two values")
      ->expected(1, 2);
  r->add_option("--planes", planes, "Plane pairs a:b,c:d (default: each machine's angle/speed)");
  v->add_option("--samples", n_samples, "Monte Carlo samples (>= 1000)");
  v->add_option("--seed", seed, "Sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  auto opt_path = [](const std::string& p) {
    return p.empty() ? std::optional<fs::path>{} : std::optional<fs::path>{p};
  };
  auto opt_str = [](const std::string& t) {
    return t.empty() ? std::optional<std::string>{} : std::optional<std::string>{t};
  };

  try {
    if (s->parsed()) {
      sample.manifest = opt_path(manifest);
      sample.system = opt_path(system);
      sample.config = opt_path(config);
      sample.out_dir = out_dir;
      if (s->count("--seed")) sample.seed = seed;
      sample.box = opt_str(box);
      cmd_sample(sample, err);
    } else if (r->parsed()) {
      RegionOptions ro;
      ro.manifest = opt_path(manifest);
      ro.model = opt_path(model);
      ro.records = opt_path(records);
      ro.system = opt_path(system);
      ro.mode = opt_str(mode);
      ro.box = opt_str(box);
      ro.planes = opt_str(planes);
      if (!resolution.empty()) {
        ro.resolution = std::array<int, 2>{resolution.front(), resolution.back()};
      }
      ro.out_dir = out_dir;
      cmd_region(ro, out);
    } else if (v->parsed()) {
      VolumeOptions vo;
      vo.manifest = opt_path(manifest);
      vo.model = opt_path(model);
      vo.records = opt_path(records);
      vo.system = opt_path(system);
      vo.mode = opt_str(mode);
      vo.box = opt_str(box);
      if (v->count("--samples")) vo.samples = n_samples;
      if (v->count("--seed")) vo.seed = seed;
      cmd_volume(vo, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: filesystem: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

}  // namespace roa::cli
