#include "cadc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cadc/config.hpp"
#include "cadc/error.hpp"
#include "cadc/format.hpp"

namespace cadc {

namespace fs = std::filesystem;

namespace {

/// Command-line problem detected after CLI11 accepted the syntax.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(Errc::Io, "write to '" + path.string() + "' failed");
}

/// Writes to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_file(path, content);
  }
}

std::string describe(const std::exception& e, const std::string& path) {
  std::string msg = e.what();
  if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
    if (pe->row() && msg.find("line ") == std::string::npos) msg += " (line " + std::to_string(*pe->row()) + ")";
    if (!pe->path().empty() && msg.find(pe->path()) == std::string::npos) msg += " at " + pe->path();
  }
  return path.empty() ? msg : path + ": " + msg;
}

FrameLogSeries load_log(const std::string& path, const std::string& format) {
  const std::string text = read_file(path);
  std::string fmt = format;
  if (fmt.empty()) fmt = fs::path(path).extension() == ".json" ? "json" : "x265csv";
  return fmt == "json" ? parse_generic_json(text) : parse_x265_csv(text);
}

/// Prints the report and returns whether it contains errors.
bool report_validation(const ValidationReport& report, const std::string& path, std::ostream& err) {
  if (!report.errors.empty() || !report.warnings.empty()) {
    err << path << ": " << report.errors.size() << " error(s), " << report.warnings.size()
        << " warning(s)\n"
        << format_report(report);
  }
  return !report.ok();
}

struct ConfigFlags {
  std::string path;
  std::optional<double> lambda_q, lambda_b, beta, epsilon, tau, rho;
  std::string variant;
  std::optional<double> theta0, omega0, eta;
  std::string modulation;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations, frames;

  CliConfig resolve() const {
    CliConfig cfg = path.empty() ? CliConfig{} : load_config(path);
    auto& sc = cfg.scoring();
    if (lambda_q) sc.lambda_q = *lambda_q;
    if (lambda_b) sc.lambda_b = *lambda_b;
    if (beta) sc.beta = *beta;
    if (epsilon) sc.epsilon = *epsilon;
    if (tau) sc.tau = *tau;
    if (rho) sc.rho = *rho;
    if (variant == "linear") sc.variant = ScoringVariant::Linear;
    if (variant == "sigmoid") {
      sc.variant = ScoringVariant::Sigmoid;
      if (!sc.tau) throw UsageError("--variant sigmoid requires --tau");
      if (!sc.rho) throw UsageError("--variant sigmoid requires --rho");
    }
    if (theta0) cfg.policy().theta0 = *theta0;
    if (omega0) cfg.policy().omega0 = *omega0;
    if (modulation == "fixed") cfg.policy().modulation = Modulation::Fixed;
    if (modulation == "exponential") cfg.policy().modulation = Modulation::Exponential;
    if (modulation == "linear") cfg.policy().modulation = Modulation::LinearVariant;
    if (eta) cfg.mask().eta = *eta;
    if (seed) cfg.experiment.seed = *seed;
    if (iterations) cfg.experiment.iterations_per_frame = *iterations;
    if (frames) cfg.synthetic.frames = *frames;
    check(cfg);
    return cfg;
  }
};

void add_config_option(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("-c,--config", f.path, "TOML-style config file (defaults are built in)");
}

void add_scoring_options(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--variant", f.variant, "Confidence scoring variant")->check(CLI::IsMember({"linear", "sigmoid"}));
  cmd->add_option("--tau", f.tau, "Sigmoid temperature (required with --variant sigmoid)");
  cmd->add_option("--rho", f.rho, "Sigmoid bit-term weight (required with --variant sigmoid)");
  cmd->add_option("--lambda-q", f.lambda_q, "QP term weight");
  cmd->add_option("--lambda-b", f.lambda_b, "Bit term weight");
  cmd->add_option("--beta", f.beta, "EMA smoothing factor");
  cmd->add_option("--epsilon", f.epsilon, "Normalisation epsilon");
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_parse_log(const std::string& path, const std::string& format, const std::string& out_path,
                  std::ostream& out, std::ostream& err) {
  FrameLogSeries series;
  try {
    series = load_log(path, format);
  } catch (const Error& e) {
    err << "error: " << describe(e, path) << "\n";
    return kExitIo;
  }
  if (report_validation(validate(series), path, err)) return kExitValidation;
  emit(out_path, serialize_generic_json(series), out);
  return kExitOk;
}

int cmd_score(const std::string& path, const std::string& format, const CliConfig& cfg,
              const std::string& out_path, std::ostream& out, std::ostream& err) {
  FrameLogSeries series;
  try {
    series = load_log(path, format);
  } catch (const Error& e) {
    err << "error: " << describe(e, path) << "\n";
    return kExitIo;
  }
  if (report_validation(validate(series), path, err)) return kExitValidation;
  emit(out_path, to_csv(score_sequence(series, cfg.scoring())), out);
  return kExitOk;
}

int cmd_simulate(const CliConfig& cfg, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const SyntheticSequence seq = make_synthetic_sequence(cfg.synthetic, cfg.experiment.seed);
  ExperimentReport report;
  try {
    report = run_experiment(seq, cfg.experiment);
  } catch (const Error& e) {
    if (e.code() != Errc::PolicyCollapse) throw;
    err << "error: " << e.what() << "\n";
    return kExitCollapse;
  }
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "report.json", to_json(report));
  nlohmann::json audit = nlohmann::json::array();
  for (const auto& u : report.updates) audit.push_back(nlohmann::json::parse(to_json(u)));
  write_file(dir / "audit.json", audit.dump(2) + "\n");
  write_file(dir / "thresholds.csv", thresholds_csv(report));
  write_file(dir / "frames.csv", frames_csv(report));
  write_file(dir / "config.toml", to_toml(cfg));
  for (std::size_t t = 0; t < report.snapshots.size(); ++t) {
    std::ostringstream name;
    name << "frame_" << std::setw(3) << std::setfill('0') << t;
    write_png(report.snapshots[t], dir / (name.str() + "_fit.png"));
    write_png(seq.degraded[t], dir / (name.str() + "_input.png"));
  }
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  const auto& last = report.frames.back();
  out << "frames " << report.frames.size() << ", primitives " << last.primitives << ", final fit PSNR "
      << format_double(last.fit_psnr) << " dB, report in " << dir.string() << "\n";
  return kExitOk;
}

int cmd_mask_stats(const std::string& path, const CliConfig& cfg, const std::string& out_path,
                   std::ostream& out, std::ostream& err) {
  std::vector<MatchStats> stats;
  try {
    stats = parse_match_stats_json(read_file(path));
  } catch (const Error& e) {
    err << "error: " << describe(e, path) << "\n";
    return kExitIo;
  }
  if (report_validation(validate(stats), path, err)) return kExitValidation;
  std::ostringstream csv;
  csv << "frame,r,d\n";
  for (const auto& s : stats) {
    const double r = inlier_ratio(s, cfg.mask().epsilon);
    csv << s.frame_index << ',' << format_double(r) << ',' << format_double(drop_rate(r, cfg.mask().eta))
        << '\n';
  }
  emit(out_path, csv.str(), out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Codec-aware density control toolkit", "cadc"};
  app.require_subcommand(1);

  std::string log_path, format, out_path, out_dir = "out";
  ConfigFlags flags;

  auto* parse_log = app.add_subcommand("parse-log", "Parse an encoder log into canonical JSON");
  parse_log->add_option("log", log_path, "x265 CSV or JSON frame log")->required();
  parse_log->add_option("-f,--format", format, "Input format (default: by extension)")
      ->check(CLI::IsMember({"x265csv", "json"}));
  parse_log->add_option("-o,--out", out_path, "Output JSON file (default: stdout)");

  auto* score = app.add_subcommand("score", "Per-frame confidence and its moving average as CSV");
  score->add_option("log", log_path, "x265 CSV or JSON frame log")->required();
  score->add_option("-f,--format", format, "Input format (default: by extension)")
      ->check(CLI::IsMember({"x265csv", "json"}));
  add_config_option(score, flags);
  add_scoring_options(score, flags);
  score->add_option("-o,--out", out_path, "Output CSV file (default: stdout)");

  auto* simulate = app.add_subcommand("simulate", "Run the seeded synthetic fitting experiment");
  add_config_option(simulate, flags);
  simulate->add_option("-s,--seed", flags.seed, "Seed for every random choice");
  simulate->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
  add_scoring_options(simulate, flags);
  simulate->add_option("--theta0", flags.theta0, "Base densification threshold");
  simulate->add_option("--omega0", flags.omega0, "Base opacity pruning threshold");
  simulate->add_option("--modulation", flags.modulation, "Threshold modulation")
      ->check(CLI::IsMember({"fixed", "exponential", "linear"}));
  simulate->add_option("--eta", flags.eta, "Drop-rate scale");
  simulate->add_option("--iterations", flags.iterations, "Optimisation steps per frame");
  simulate->add_option("--frames", flags.frames, "Number of synthetic frames");

  auto* mask_stats = app.add_subcommand("mask-stats", "Inlier ratio and drop rate per frame as CSV");
  mask_stats->add_option("stats", log_path, "JSON array of {frame_index, keypoints, inliers}")->required();
  add_config_option(mask_stats, flags);
  mask_stats->add_option("--eta", flags.eta, "Drop-rate scale");
  mask_stats->add_option("-o,--out", out_path, "Output CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CliConfig cfg;
    try {
      cfg = flags.resolve();
    } catch (const Error& e) {
      err << "error: " << describe(e, flags.path) << "\n";
      return kExitIo;
    }
    if (parse_log->parsed()) return cmd_parse_log(log_path, format, out_path, out, err);
    if (score->parsed()) return cmd_score(log_path, format, cfg, out_path, out, err);
    if (simulate->parsed()) return cmd_simulate(cfg, out_dir, out, err);
    return cmd_mask_stats(log_path, cfg, out_path, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace cadc
