// protobasis command-line tool: synth, select, fit, experiment.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "protobasis/protobasis.hpp"

namespace fs = std::filesystem;
using namespace protobasis;

namespace {

GridRange parse_range(const std::string& text, const std::string& flag) {
  const auto parts = io::split(text, ':');
  if (parts.size() != 3) throw Error(ErrorCode::kInvalidArgument, flag + " expects min:max:step, got '" + text + "'");
  return {io::parse_double(parts[0], flag), io::parse_double(parts[1], flag), io::parse_double(parts[2], flag)};
}

std::uint64_t resolve_seed(std::uint64_t seed) {
  if (const char* env = std::getenv("PROTOBASIS_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, std::string("PROTOBASIS_SEED is not an integer: ") + env);
    }
  }
  return seed;
}

struct RunContext {
  std::string command_line;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  nlohmann::json manifest(const nlohmann::json& config, std::uint64_t seed,
                          const std::vector<fs::path>& artifacts) const {
    nlohmann::json run;
    run["command_line"] = command_line;
    run["config"] = config;
    run["config_hash"] = io::config_hash(config);
    run["seed"] = seed;
    run["artifacts"] = nlohmann::json::array();
    for (const auto& a : artifacts) run["artifacts"].push_back(a.string());
    run["tool_version"] = kVersion;
    run["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
  }
};

fs::path output_dir(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

struct SynthArgs {
  std::string sigma = "0.2:8:0.05";
  std::string x = "-8:8:0.05";
  int n = 100;
  int max_comp = 5;
  double noise_sd = 0.05;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a, const RunContext& ctx) {
  if (a.n < 1) throw Error(ErrorCode::kInvalidArgument, "--n must be >= 1");
  const Dictionary dict = gaussian_dictionary(parse_range(a.sigma, "--sigma"), parse_range(a.x, "--x"));
  MixtureSimConfig sim{a.n, a.max_comp, a.noise_sd, resolve_seed(a.seed)};
  const auto observations = simulate_mixtures(dict, sim);
  const fs::path dir(a.out);
  io::save_dictionary(dir, dict);
  io::save_observations(dir, observations);
  const nlohmann::json config = {{"sigma", a.sigma}, {"x", a.x}, {"n_observations", a.n},
                                 {"max_components", a.max_comp}, {"noise_sd", a.noise_sd}};
  io::record_manifest(dir, ctx.manifest(config, sim.seed,
                                        {dir / "curves.csv", dir / "params.csv", dir / "observations.csv",
                                         dir / "truth.csv"}));
  std::cout << "wrote N=" << dict.size() << " p=" << dict.length() << " dictionary and " << observations.size()
            << " observations to " << dir.string() << '\n';
  return 0;
}

struct SelectArgs {
  std::string method;
  Index k = 0;
  std::uint64_t seed = 0;
  std::string dict;
  std::string out;
  std::optional<double> lambda;
  std::optional<Index> target_k;
  std::optional<int> restarts;
  std::optional<int> max_iter;
};

int cmd_select(const SelectArgs& a, const RunContext& ctx) {
  const auto& names = known_methods();
  if (std::find(names.begin(), names.end(), a.method) == names.end()) {
    throw Error(ErrorCode::kUnknownMethod, "unknown selection method '" + a.method + "'");
  }
  const Dictionary dict = io::load_dictionary(a.dict);
  nlohmann::json options = nlohmann::json::object();
  if (a.lambda) options["lambda"] = *a.lambda;
  if (a.restarts) options["n_restarts"] = *a.restarts;
  if (a.max_iter) options["max_iter"] = *a.max_iter;

  Index K = a.k;
  if (a.method == "sss") {
    if (a.target_k) K = *a.target_k;
    else if (a.lambda) K = 0;
  }
  if (K < 1 && a.method != "sss") throw Error(ErrorCode::kInvalidArgument, "--k must be >= 1");
  if (a.method == "sss" && K < 1 && !a.lambda) throw Error(ErrorCode::kInvalidArgument, "sss needs --lambda or --target-k");

  const std::uint64_t seed = resolve_seed(a.seed);
  const PrototypeBasis basis = select_basis(dict, a.method, K, options, seed);
  const nlohmann::json config = {{"method", a.method}, {"K", K}, {"seed", seed}, {"options", options},
                                 {"dict", fs::absolute(a.dict).string()}};
  const fs::path out(a.out);
  io::save_basis(out, basis, config);
  io::record_manifest(output_dir(out), ctx.manifest(config, seed, {out, io::sidecar_path(out)}));
  std::cout << "selected " << basis.size() << " prototypes with " << a.method << " -> " << out.string() << '\n';
  return 0;
}

struct FitArgs {
  std::string basis;
  std::string obs;
  std::string dict;
  bool weighted = false;
  std::string noise;
  std::optional<double> noise_sd;
  std::string out;
};

int cmd_fit(const FitArgs& a, const RunContext& ctx) {
  std::string dict_dir = a.dict;
  if (dict_dir.empty() && fs::exists(io::sidecar_path(a.basis))) {
    const auto side = io::read_json(io::sidecar_path(a.basis));
    if (side.contains("config_echo") && side["config_echo"].contains("dict")) {
      dict_dir = side["config_echo"]["dict"].get<std::string>();
    }
  }
  if (dict_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot locate the dictionary; pass --dict");
  const Dictionary dict = io::load_dictionary(dict_dir);
  const PrototypeBasis basis = io::load_basis(a.basis, dict);

  std::optional<fs::path> noise_path;
  if (!a.noise.empty()) noise_path = a.noise;
  auto observations = io::load_observations(a.obs, noise_path);
  if (a.noise_sd) {
    if (!(*a.noise_sd > 0.0)) throw Error(ErrorCode::kInvalidArgument, "--noise-sd must be positive");
    for (auto& o : observations) o.noise_scale = Vector::Constant(o.y.size(), *a.noise_sd);
  }
  if (a.weighted && !noise_path && !a.noise_sd) {
    throw Error(ErrorCode::kMissingNoiseScale, "--weighted needs --noise or --noise-sd");
  }

  FitConfig cfg;
  cfg.weight_by_noise = a.weighted;
  std::vector<MixtureFit> fits;
  fits.reserve(observations.size());
  for (const auto& o : observations) fits.push_back(simplex_fit(basis, o, cfg));

  const fs::path out(a.out);
  io::write_fits(out, fits, basis);
  const nlohmann::json config = {{"basis", a.basis}, {"obs", a.obs}, {"dict", dict_dir}, {"weighted", a.weighted}};
  io::record_manifest(output_dir(out), ctx.manifest(config, 0, {out}));
  std::cout << "fitted " << fits.size() << " observations -> " << out.string() << '\n';
  return 0;
}

struct ExperimentArgs {
  std::string config;
  std::string out;
  std::optional<int> reps;
  std::string dict;
};

int cmd_experiment(const ExperimentArgs& a, int jobs, const RunContext& ctx) {
  ExperimentConfig cfg = experiment_config_from_json(io::read_json(a.config));
  if (a.reps) cfg.n_reps = *a.reps;
  cfg.seed = resolve_seed(cfg.seed);
  if (jobs > 0) cfg.jobs = jobs;
  validate_experiment(cfg);

  Dictionary dict;
  if (!a.dict.empty()) {
    dict = io::load_dictionary(a.dict);
  } else if (cfg.dictionary.kind == DictionarySpec::Kind::kFiles) {
    fs::path p(cfg.dictionary.path);
    if (p.is_relative()) p = fs::path(a.config).parent_path() / p;
    dict = io::load_dictionary(p);
  } else {
    dict = experiment_dictionary(cfg);
  }
  const ExperimentReport report = run_experiment(cfg, dict);
  const fs::path out(a.out);
  io::write_report(out, report);
  io::record_manifest(output_dir(out), ctx.manifest(report.config_echo, cfg.seed, {out, fs::path(out.string() + ".json")}));
  io::write_report(std::cout, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype basis selection and mixture-parameter estimation"};
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("--jobs", jobs, "Worker threads (default: all cores); results do not depend on it");

  RunContext ctx;
  for (int i = 0; i < argc; ++i) ctx.command_line += (i ? " " : "") + std::string(argv[i]);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the Gaussian dictionary and noisy mixture observations");
  s->add_option("--sigma", synth.sigma, "Sigma grid min:max:step")->capture_default_str();
  s->add_option("--x", synth.x, "Sample grid min:max:step")->capture_default_str();
  s->add_option("--n", synth.n, "Number of observations")->capture_default_str();
  s->add_option("--max-comp", synth.max_comp, "Maximum nonzero mixture components")->capture_default_str();
  s->add_option("--noise-sd", synth.noise_sd, "Noise standard deviation")->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  SelectArgs select;
  auto* sel = app.add_subcommand("select", "Select a prototype basis from a dictionary");
  sel->add_option("--method", select.method, "km | km-central | dkm | uss | aa | sss | grid | log-grid")->required();
  sel->add_option("--k", select.k, "Number of prototypes");
  sel->add_option("--seed", select.seed, "Selector seed")->capture_default_str();
  sel->add_option("--dict", select.dict, "Dictionary directory (curves.csv, params.csv)")->required();
  sel->add_option("--out", select.out, "Output basis CSV")->required();
  sel->add_option("--lambda", select.lambda, "SSS penalty weight");
  sel->add_option("--target-k", select.target_k, "SSS target prototype count");
  sel->add_option("--restarts", select.restarts, "Restarts for km, km-central, dkm and aa");
  sel->add_option("--max-iter", select.max_iter, "Iteration cap for the selector");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit observations as scaled simplex mixtures of a basis");
  f->add_option("--basis", fit.basis, "Basis CSV written by select")->required();
  f->add_option("--obs", fit.obs, "Observations CSV, one row per observation")->required();
  f->add_option("--dict", fit.dict, "Dictionary directory (default: recorded in the basis sidecar)");
  f->add_flag("--weighted", fit.weighted, "Weight residuals by the inverse noise scale");
  f->add_option("--noise", fit.noise, "Noise-scale CSV (one row per observation or one shared row)");
  f->add_option("--noise-sd", fit.noise_sd, "Constant noise scale for every coordinate");
  f->add_option("--out", fit.out, "Output fits CSV")->required();

  ExperimentArgs exp;
  auto* e = app.add_subcommand("experiment", "Run a Monte-Carlo comparison of prototype bases");
  e->add_option("--config", exp.config, "Experiment JSON")->required();
  e->add_option("--out", exp.out, "Output report CSV")->required();
  e->add_option("--reps", exp.reps, "Override the repetition count");
  e->add_option("--dict", exp.dict, "Dictionary directory overriding the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_synth(synth, ctx);
    if (*sel) return cmd_select(select, ctx);
    if (*f) return cmd_fit(fit, ctx);
    if (*e) return cmd_experiment(exp, jobs, ctx);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 4;
  }
  return 2;
}
