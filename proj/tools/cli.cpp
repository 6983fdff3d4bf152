#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ign/sampler.hpp"
#include "ign/theory.hpp"
#include "ign/verify.hpp"

#ifndef IGN_VERSION
#define IGN_VERSION "unknown"
#endif

namespace ign::cli {

namespace fs = std::filesystem;

namespace {

/// Input problems map to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::optional<fs::path> env_output_dir() {
  if (const char* v = std::getenv(kOutputDirEnv); v && *v) return fs::path(v);
  return std::nullopt;
}

// --out beats the environment, which beats the command's default.
fs::path resolve_out(const std::string& flag, const fs::path& fallback) {
  if (!flag.empty()) return flag;
  if (auto env = env_output_dir()) return *env;
  return fallback;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// Every TrainConfig key as a string option, spelled with underscores and
// with dashes.
struct ConfigFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd, const std::vector<std::string>& keys) {
    for (const auto& k : keys) {
      std::string dashed = k;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      const std::string names = dashed == k ? "--" + k : "--" + k + ",--" + dashed;
      cmd->add_option(names, values[k], "config key '" + k + "'");
    }
  }

  std::map<std::string, std::string> given(CLI::App* cmd) const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : values) {
      if (cmd->count("--" + k) > 0) out[k] = v;
    }
    return out;
  }
};

struct LoadedModel {
  fs::path path;
  TrainConfig cfg;
  ArchSpec arch;
  TrainState state;
};

LoadedModel load_model(const fs::path& path, const std::string& config_path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
  const Checkpoint ck = load_checkpoint(path);
  LoadedModel m{path, config_from_checkpoint(ck), {}, {}};
  TrainConfig expected = m.cfg;
  if (!config_path.empty()) expected = TrainConfig::from_map(read_config_file(config_path), m.cfg);
  m.arch = expected.build_arch();
  m.state = from_checkpoint(ck, m.arch);
  return m;
}

Grid draw_latents(const LoadedModel& m, NoiseMode mode, std::size_t count, std::uint64_t seed) {
  if (mode == NoiseMode::spectral) {
    if (m.state.spectrum.empty()) throw UsageError("checkpoint has no spectral statistics; use --noise gaussian");
    return sample_spectral(m.state.spectrum, count, seed);
  }
  return sample_gaussian(with_batch(count, m.arch.signature), seed);
}

std::size_t square_cols(std::size_t n) {
  return std::max<std::size_t>(1, std::size_t(std::ceil(std::sqrt(double(n)))));
}

// Images become a PNG sheet; vectors a tab-separated table in cell order.
fs::path write_cells(const fs::path& stem, const Grid& cells, std::size_t cols) {
  if (cells.rank() == 4) {
    const fs::path p = stem.string() + ".png";
    write_sheet(p, cells, cols);
    return p;
  }
  const fs::path p = stem.string() + ".tsv";
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  const std::size_t m = cells.size() / cells.dim(0);
  out << std::setprecision(9);
  for (std::size_t i = 0; i < cells.dim(0); ++i) {
    out << i / cols << '\t' << i % cols;
    for (std::size_t j = 0; j < m; ++j) out << '\t' << cells[i * m + j];
    out << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return p;
}

Grid concat_batches(const std::vector<Grid>& parts) {
  std::size_t rows = 0;
  for (const auto& p : parts) rows += p.dim(0);
  Grid out(with_batch(rows, sample_shape(parts.at(0).shape())));
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy_n(p.data(), p.size(), out.data() + at);
    at += p.size();
  }
  return out;
}

Grid take_rows(const Grid& g, std::size_t first, std::size_t count) {
  Grid out(with_batch(count, sample_shape(g.shape())));
  const std::size_t m = out.size() / count;
  std::copy_n(g.data() + first * m, count * m, out.data());
  return out;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string resume;
  ConfigFlags flags;
};

int cmd_train(const TrainArgs& a, CLI::App* cmd, const std::vector<std::string>& argv, std::ostream& out,
              std::ostream& err) {
  std::optional<TrainState> resume;
  TrainConfig cfg;
  if (!a.resume.empty()) {
    if (!fs::exists(a.resume)) throw UsageError("checkpoint not found: " + a.resume);
    cfg = config_from_checkpoint(load_checkpoint(a.resume));
  }
  if (!a.config.empty()) {
    if (!fs::exists(a.config)) throw UsageError("config file not found: " + a.config);
    cfg = TrainConfig::from_map(read_config_file(a.config), cfg);
  }
  if (auto env = env_output_dir()) cfg.output_dir = env->string();
  cfg = TrainConfig::from_map(a.flags.given(cmd), cfg);
  cfg.validate();
  const ArchSpec arch = cfg.build_arch();
  if (!a.resume.empty()) resume = from_checkpoint(load_checkpoint(a.resume), arch);

  std::vector<std::string> skipped;
  const Grid data = ingest_dataset(cfg.dataset_path, cfg.dataset_kind, cfg.channels, cfg.resolution, cfg.toy_count,
                                   cfg.seed, &skipped);
  for (const auto& s : skipped) err << "warning: skipped " << s << '\n';

  const fs::path dir = cfg.output_dir;
  RunManifest manifest;
  manifest.config = cfg.to_map();
  manifest.seed = cfg.seed;
  manifest.version = version_string();
  manifest.dataset_kind = to_string(cfg.dataset_kind);
  manifest.dataset_path = cfg.dataset_path;
  manifest.dataset = dataset_fingerprint(data);
  manifest.started = utc_timestamp();
  manifest.command = argv;
  manifest.resumed_from = a.resume;
  const fs::path manifest_path =
      resume ? dir / ("manifest-resume-" + std::to_string(resume->step) + ".json") : dir / "manifest.json";
  if (fs::exists(manifest_path)) throw UsageError("refusing to overwrite " + manifest_path.string());
  write_json(manifest_path, manifest.to_json());

  // Fixed noise so successive sheets show the same latents.
  const std::uint64_t sample_seed = cfg.seed ^ 0x5eedULL;
  TrainHooks hooks;
  hooks.on_sample = [&](const TrainState& s) {
    const std::size_t count = arch.kind == ArchKind::mlp ? 1024 : 64;
    Grid z = cfg.noise == NoiseMode::spectral ? sample_spectral(s.spectrum, count, sample_seed)
                                              : sample_gaussian(with_batch(count, arch.signature), sample_seed);
    std::ostringstream name;
    name << "step-" << std::setw(6) << std::setfill('0') << s.step;
    write_cells(dir / "samples" / name.str(), forward(s.live, arch, z), square_cols(count));
  };
  const std::uint64_t every = cfg.eval_every ? cfg.eval_every : 100;
  hooks.on_step = [&](const TrainState& s, const StepResult& r) {
    if (s.step % every == 0) {
      out << "step " << s.step << "  rec " << r.report.rec << "  idem " << r.report.idem << "  tight "
          << r.report.tight_raw << "  total " << r.report.total << (r.clipped ? "  (clipped)" : "") << '\n';
    }
  };

  const auto result = train(cfg, data, hooks, std::move(resume));
  nlohmann::json done{{"finished", utc_timestamp()},
                      {"steps", result.state.step},
                      {"final_checkpoint", result.final_checkpoint.string()}};
  write_json(dir / (manifest_path.stem().string() + ".completed.json"), done);
  out << "trained " << result.state.step << " steps; checkpoint " << result.final_checkpoint.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- inference

struct ModelArgs {
  std::string checkpoint;
  std::string config;
  std::string out;
  std::string noise;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--checkpoint,-c", checkpoint, "trained checkpoint")->required();
    cmd->add_option("--config", config, "expected model configuration; must match the checkpoint");
    cmd->add_option("--out,-o", out, "output directory");
    cmd->add_option("--seed", seed, "noise seed");
    cmd->add_option("--noise", noise, "gaussian or spectral (default: as trained)");
  }

  NoiseMode noise_mode(const LoadedModel& m) const { return noise.empty() ? m.cfg.noise : noise_mode_from_string(noise); }
  fs::path out_dir(const std::string& op) const { return resolve_out(out, fs::path(checkpoint).parent_path() / op); }
};

int cmd_generate(const ModelArgs& a, std::size_t count, std::size_t n, std::ostream& out) {
  if (count < 1 || n < 1) throw UsageError("--count and --n must be >= 1");
  const auto m = load_model(a.checkpoint, a.config);
  const Grid z = draw_latents(m, a.noise_mode(m), count, a.seed);
  const auto seq = apply_n(m.state.live, m.arch, z, n);
  const fs::path dir = a.out_dir("generate");
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto p = write_cells(dir / ("generate_seed" + std::to_string(a.seed) + "_n" + std::to_string(k + 1)), seq[k],
                               square_cols(count));
    out << p.string() << '\n';
  }
  return kOk;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file()) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

struct ProjectArgs {
  std::vector<std::string> inputs;
  std::string degradation = "none";
  double sigma = 0.15;
  std::size_t kernel = 21;
  std::vector<std::size_t> mask;
  double mask_sigma = 1.0;
  std::size_t n = 3;
  std::size_t idx_count = 16;
};

int cmd_project(const ModelArgs& a, const ProjectArgs& p, std::ostream& out, std::ostream& err) {
  const auto m = load_model(a.checkpoint, a.config);
  if (m.arch.signature.size() != 3) throw UsageError("project needs an image model");
  const std::size_t c = m.arch.signature[0], res = m.arch.signature[1];
  DegradationSpec spec;
  spec.kind = degradation_kind_from_string(p.degradation);
  spec.sigma = p.sigma;
  spec.kernel = p.kernel;
  spec.mask_sigma = p.mask_sigma;
  if (!p.mask.empty()) {
    if (p.mask.size() != 4) throw UsageError("--mask takes x,y,width,height");
    spec.mask = {p.mask[0], p.mask[1], p.mask[2], p.mask[3]};
  }
  spec.validate(m.arch.signature);

  std::vector<Grid> images;
  std::size_t skipped = 0;
  for (const auto& file : expand_inputs(p.inputs)) {
    try {
      if (file.filename().string().ends_with("idx3-ubyte")) {
        const Grid all = read_idx_images(file);
        if (sample_shape(all.shape()) != m.arch.signature) throw DataError("IDX images do not match the model");
        images.push_back(take_rows(all, 0, std::min(p.idx_count, all.dim(0))));
      } else {
        images.push_back(load_image(file, c, res));
      }
    } catch (const std::exception& e) {
      err << "warning: skipping " << file.string() << ": " << e.what() << '\n';
      ++skipped;
    }
  }
  if (images.empty()) throw UsageError("no decodable input images (" + std::to_string(skipped) + " skipped)");
  const Grid x = concat_batches(images);
  const Grid degraded = degrade(x, spec, a.seed);
  std::vector<Grid> cols{x, degraded};
  for (auto& g : project(m.state.live, m.arch, degraded, p.n)) cols.push_back(std::move(g));
  const fs::path stem = a.out_dir("project") / ("project_" + p.degradation + "_seed" + std::to_string(a.seed) + "_n" +
                                                std::to_string(p.n));
  const auto path = write_cells(stem, interleave_columns(cols), cols.size());
  out << path.string() << '\n';
  out << "projected " << x.dim(0) << " images, skipped " << skipped << '\n';
  return kOk;
}

int cmd_interpolate(const ModelArgs& a, std::size_t steps, std::size_t pairs, std::ostream& out) {
  if (pairs < 1) throw UsageError("--pairs must be >= 1");
  const auto m = load_model(a.checkpoint, a.config);
  const Grid z = draw_latents(m, a.noise_mode(m), 2 * pairs, a.seed);
  std::vector<Grid> rows;
  for (std::size_t i = 0; i < pairs; ++i) {
    rows.push_back(interpolate(m.state.live, m.arch, take_rows(z, 2 * i, 1), take_rows(z, 2 * i + 1, 1), steps));
  }
  const fs::path stem =
      a.out_dir("interpolate") / ("interpolate_seed" + std::to_string(a.seed) + "_steps" + std::to_string(steps));
  out << write_cells(stem, concat_batches(rows), kInterpolationColumns).string() << '\n';
  return kOk;
}

int cmd_arithmetic(const ModelArgs& a, std::uint64_t pos_seed, std::uint64_t neg_seed, std::size_t k,
                   std::size_t count, std::ostream& out) {
  if (k < 1 || count < 1) throw UsageError("--k and --count must be >= 1");
  const auto m = load_model(a.checkpoint, a.config);
  const NoiseMode mode = a.noise_mode(m);
  const Grid pos = draw_latents(m, mode, k, pos_seed), neg = draw_latents(m, mode, k, neg_seed);
  const Grid z = draw_latents(m, mode, count, a.seed);
  const Grid result = latent_arithmetic_mean(m.state.live, m.arch, pos, neg, z);
  // Each row: f(mean z+), f(mean z-), f(z), f((z+ - z-) + z).
  auto mean_row = [&](const Grid& g) {
    Grid one = latent_arithmetic_mean(m.state.live, m.arch, g, Grid(g.shape()), Grid(with_batch(1, m.arch.signature)));
    std::vector<Grid> rep(count, one);
    return concat_batches(rep);
  };
  const Grid cells =
      interleave_columns({mean_row(pos), mean_row(neg), forward(m.state.live, m.arch, z), result});
  const fs::path stem =
      a.out_dir("arithmetic") / ("arithmetic_seed" + std::to_string(a.seed) + "_k" + std::to_string(k));
  out << write_cells(stem, cells, 4).string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- verify

struct TheoremArgs {
  std::size_t n = 3;
  std::string lambda_t = "1";
  std::string p_z, p_x;
  std::string space = "line";
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::string report;
};

int verify_routing(std::ostream& out) {
  bool ok = true;
  for (const auto& suite : {routing_checks(), zero_path_checks(), identity_checks()}) {
    out << format_checks(suite);
    ok = ok && all_pass(suite);
  }
  out << "routing: " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kOk : kFailure;
}

int verify_theorem(const TheoremArgs& t, std::ostream& out) {
  using namespace theory;
  if (t.n < 1) throw UsageError("--n must be >= 1");
  const auto lambda = parse_distribution(t.lambda_t);
  if (lambda.size() != 1) throw UsageError("--lambda-t takes one number");
  DistanceMatrix space;
  if (t.space == "line") space = line_space(t.n);
  else if (t.space == "discrete") space = discrete_space(t.n);
  else throw UsageError("unknown --space '" + t.space + "' (expected line or discrete)");
  const Distribution pz = t.p_z.empty() ? uniform(t.n) : parse_distribution(t.p_z);
  const Distribution px = t.p_x.empty() ? uniform(t.n) : parse_distribution(t.p_x);
  const SearchResult r = t.samples > 0 ? sampled_fixed_point_search(space, pz, px, lambda[0], t.samples, t.seed)
                                       : fixed_point_search(space, pz, px, lambda[0]);
  out << format_report(r);
  if (!t.report.empty()) write_report(t.report, r);
  if (lambda[0] != 1) return kOk;
  return r.all_match() ? kOk : kFailure;
}

// ---------------------------------------------------------------- ingest-check

struct IngestArgs {
  std::string kind = "idx";
  std::string path;
  std::size_t channels = 1;
  std::size_t resolution = 28;
  std::size_t toy_count = 8192;
  std::uint64_t seed = 0;
};

int cmd_ingest_check(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> skipped;
  Grid g;
  try {
    g = ingest_dataset(a.path, dataset_kind_from_string(a.kind), a.channels, a.resolution, a.toy_count, a.seed,
                       &skipped);
  } catch (const DataError& e) {
    std::string msg = e.what();
    if (e.offset() != DataError::npos) msg += " (byte offset " + std::to_string(e.offset()) + ")";
    throw UsageError(msg);
  }
  for (const auto& s : skipped) err << "warning: skipped " << s << '\n';
  const auto [lo, hi] = std::minmax_element(g.values().begin(), g.values().end());
  const auto fp = dataset_fingerprint(g);
  out << "samples     " << fp.count << '\n'
      << "shape       " << shape_to_string(sample_shape(g.shape())) << '\n'
      << "range       " << (g.size() ? *lo : 0.0f) << " .. " << (g.size() ? *hi : 0.0f) << '\n'
      << "skipped     " << skipped.size() << '\n'
      << "fingerprint " << hex64(fp.hash) << '\n';
  return kOk;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("<file>", e.what());
  }
  std::map<std::string, std::string> kv;
  auto add = [&](const std::string& key, const std::string& value) {
    if (!kv.emplace(key, value).second) throw ConfigError(key, "set more than once in " + path.string());
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      add(name, node.data());
    } else {
      for (const auto& [key, leaf] : node) add(key, leaf.data());
    }
  }
  for (const auto& [k, v] : kv) {
    const auto& keys = TrainConfig::keys();
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError(k, "unknown key in " + path.string());
  }
  return kv;
}

nlohmann::json RunManifest::to_json() const {
  return {{"config", config},
          {"seed", seed},
          {"version", version},
          {"dataset", {{"kind", dataset_kind}, {"path", dataset_path}, {"count", dataset.count}, {"hash", hex64(dataset.hash)}}},
          {"started", started},
          {"command", command},
          {"resumed_from", resumed_from}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.version = j.at("version").get<std::string>();
  const auto& d = j.at("dataset");
  m.dataset_kind = d.at("kind").get<std::string>();
  m.dataset_path = d.at("path").get<std::string>();
  m.dataset.count = d.at("count").get<std::size_t>();
  m.dataset.hash = std::stoull(d.at("hash").get<std::string>(), nullptr, 16);
  m.started = j.at("started").get<std::string>();
  m.command = j.at("command").get<std::vector<std::string>>();
  m.resumed_from = j.at("resumed_from").get<std::string>();
  return m;
}

std::string version_string() { return IGN_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Idempotent generative network: training, sampling and verification"};
  app.name("ign");
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", train_args.config, "INI config file");
  train_cmd->add_option("--resume", train_args.resume, "continue from a checkpoint");
  train_args.flags.attach(train_cmd, TrainConfig::keys());

  ModelArgs gen_args;
  std::size_t gen_count = 64, gen_n = 1;
  auto* gen_cmd = app.add_subcommand("generate", "sample from noise and apply f repeatedly");
  gen_args.attach(gen_cmd);
  gen_cmd->add_option("--count", gen_count, "samples per sheet");
  gen_cmd->add_option("--n", gen_n, "application depths 1..n, one sheet each");

  ModelArgs proj_args;
  ProjectArgs proj;
  auto* proj_cmd = app.add_subcommand("project", "degrade inputs and project them with f");
  proj_args.attach(proj_cmd);
  proj_cmd->add_option("--input,-i", proj.inputs, "image files, directories or an IDX image file")->required();
  proj_cmd->add_option("--degradation", proj.degradation, "none, noise, grayscale, sketch or mask_noise");
  proj_cmd->add_option("--sigma", proj.sigma, "additive noise standard deviation");
  proj_cmd->add_option("--kernel", proj.kernel, "sketch blur kernel size (odd)");
  proj_cmd->add_option("--mask", proj.mask, "mask rectangle x,y,width,height")->delimiter(',');
  proj_cmd->add_option("--mask-sigma", proj.mask_sigma, "noise standard deviation inside the mask");
  proj_cmd->add_option("--n", proj.n, "applications of f");
  proj_cmd->add_option("--idx-count", proj.idx_count, "images taken from an IDX file");

  ModelArgs interp_args;
  std::size_t interp_steps = 8, interp_pairs = 1;
  auto* interp_cmd = app.add_subcommand("interpolate", "linear interpolation between two latents");
  interp_args.attach(interp_cmd);
  interp_cmd->add_option("--steps", interp_steps, "interpolation points per pair");
  interp_cmd->add_option("--pairs", interp_pairs, "latent pairs");

  ModelArgs arith_args;
  std::uint64_t pos_seed = 1, neg_seed = 2;
  std::size_t arith_k = 1, arith_count = 8;
  auto* arith_cmd = app.add_subcommand("arithmetic", "f((z+ - z-) + z)");
  arith_args.attach(arith_cmd);
  arith_cmd->add_option("--pos-seed", pos_seed, "seed of z+");
  arith_cmd->add_option("--neg-seed", neg_seed, "seed of z-");
  arith_cmd->add_option("--k", arith_k, "average z+ and z- over k latents each");
  arith_cmd->add_option("--count", arith_count, "base latents z");

  std::string suite;
  TheoremArgs theorem;
  auto* verify_cmd = app.add_subcommand("verify", "gradient-routing checks and the finite-space oracle");
  verify_cmd->add_option("suite", suite, "routing, theorem or all")->required()->check(CLI::IsMember({"routing", "theorem", "all"}));
  verify_cmd->add_option("--n", theorem.n, "points in the finite space");
  verify_cmd->add_option("--lambda-t,--lambda_t", theorem.lambda_t, "tightness weight, e.g. 1 or 1/2");
  verify_cmd->add_option("--pz", theorem.p_z, "source distribution, e.g. 1/3,1/3,1/3 (default uniform)");
  verify_cmd->add_option("--px", theorem.p_x, "target distribution (default uniform)");
  verify_cmd->add_option("--space", theorem.space, "line or discrete distances");
  verify_cmd->add_option("--samples", theorem.samples, "sample this many maps instead of enumerating");
  verify_cmd->add_option("--seed", theorem.seed, "seed for sampled maps");
  verify_cmd->add_option("--report", theorem.report, "write the theorem report here");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest-check", "load a dataset and print its summary");
  ingest_cmd->add_option("--kind", ingest.kind, "idx, image_dir or toy2d");
  ingest_cmd->add_option("--path", ingest.path, "dataset file or directory");
  ingest_cmd->add_option("--channels", ingest.channels);
  ingest_cmd->add_option("--resolution", ingest.resolution);
  ingest_cmd->add_option("--toy-count", ingest.toy_count);
  ingest_cmd->add_option("--seed", ingest.seed);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, train_cmd, args, out, err);
    if (*gen_cmd) return cmd_generate(gen_args, gen_count, gen_n, out);
    if (*proj_cmd) return cmd_project(proj_args, proj, out, err);
    if (*interp_cmd) return cmd_interpolate(interp_args, interp_steps, interp_pairs, out);
    if (*arith_cmd) return cmd_arithmetic(arith_args, pos_seed, neg_seed, arith_k, arith_count, out);
    if (*verify_cmd) {
      int code = kOk;
      if (suite == "routing" || suite == "all") code = std::max(code, verify_routing(out));
      if (suite == "theorem" || suite == "all") code = std::max(code, verify_theorem(theorem, out));
      return code;
    }
    if (*ingest_cmd) return cmd_ingest_check(ingest, out, err);
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what();
    if (e.offset() != DataError::npos) err << " (byte offset " << e.offset() << ")";
    err << '\n';
    return kUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace ign::cli
