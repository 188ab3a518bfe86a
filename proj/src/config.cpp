#include "cadc/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

#include "cadc/error.hpp"
#include "cadc/format.hpp"

namespace cadc {

namespace {

using Value = std::variant<bool, double, std::string>;

struct Location {
  std::size_t line;
  std::string path;
};

[[noreturn]] void fail(const Location& at, const std::string& msg) {
  throw ParseError(Errc::InvalidConfig, "line " + std::to_string(at.line) + ", " + at.path + ": " + msg,
                   at.line, at.path);
}

double as_number(const Value& v, const Location& at) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  fail(at, "expected a number");
}

bool as_bool(const Value& v, const Location& at) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  fail(at, "expected true or false");
}

const std::string& as_string(const Value& v, const Location& at) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  fail(at, "expected a quoted string");
}

std::uint64_t as_count(const Value& v, const Location& at) {
  const double d = as_number(v, at);
  if (!(d >= 0.0) || d != std::floor(d) || d > 9.007199254740992e15) {
    fail(at, "expected a non-negative integer");
  }
  return static_cast<std::uint64_t>(d);
}

template <typename Enum>
Enum as_enum(const Value& v, const Location& at, std::initializer_list<std::pair<const char*, Enum>> names) {
  const std::string& s = as_string(v, at);
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (s == name) return value;
    allowed += allowed.empty() ? name : std::string(", ") + name;
  }
  fail(at, "unknown value \"" + s + "\" (expected one of " + allowed + ")");
}

using Setter = std::function<void(CliConfig&, const Value&, const Location&)>;

Setter number(double ExperimentConfig::*field) {
  return [field](CliConfig& c, const Value& v, const Location& at) { c.experiment.*field = as_number(v, at); };
}

template <typename Struct>
Setter number_in(Struct& (CliConfig::*member)(), double Struct::*field) {
  return [member, field](CliConfig& c, const Value& v, const Location& at) {
    (c.*member)().*field = as_number(v, at);
  };
}

template <typename Field>
Setter synthetic(Field SyntheticConfig::*field) {
  return [field](CliConfig& c, const Value& v, const Location& at) {
    if constexpr (std::is_same_v<Field, double>) {
      c.synthetic.*field = as_number(v, at);
    } else {
      c.synthetic.*field = static_cast<Field>(as_count(v, at));
    }
  };
}

Setter learning_rate(double LearningRates::*field) {
  return [field](CliConfig& c, const Value& v, const Location& at) { c.experiment.lr.*field = as_number(v, at); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"scoring.lambda_q", number_in(&CliConfig::scoring, &ScoringConfig::lambda_q)},
      {"scoring.lambda_b", number_in(&CliConfig::scoring, &ScoringConfig::lambda_b)},
      {"scoring.epsilon", number_in(&CliConfig::scoring, &ScoringConfig::epsilon)},
      {"scoring.beta", number_in(&CliConfig::scoring, &ScoringConfig::beta)},
      {"scoring.variant",
       [](CliConfig& c, const Value& v, const Location& at) {
         c.scoring().variant =
             as_enum<ScoringVariant>(v, at, {{"linear", ScoringVariant::Linear}, {"sigmoid", ScoringVariant::Sigmoid}});
       }},
      {"scoring.ema_init",
       [](CliConfig& c, const Value& v, const Location& at) {
         c.scoring().ema_init = as_enum<EmaInit>(v, at, {{"first", EmaInit::FirstValue}, {"zero", EmaInit::Zero}});
       }},
      {"scoring.tau", [](CliConfig& c, const Value& v, const Location& at) { c.scoring().tau = as_number(v, at); }},
      {"scoring.rho", [](CliConfig& c, const Value& v, const Location& at) { c.scoring().rho = as_number(v, at); }},

      {"density.theta0", number_in(&CliConfig::policy, &DensityPolicyConfig::theta0)},
      {"density.omega0", number_in(&CliConfig::policy, &DensityPolicyConfig::omega0)},
      {"density.alpha_lin", number_in(&CliConfig::policy, &DensityPolicyConfig::alpha_lin)},
      {"density.modulation",
       [](CliConfig& c, const Value& v, const Location& at) {
         c.policy().modulation = as_enum<Modulation>(v, at,
                                         {{"fixed", Modulation::Fixed},
                                          {"exponential", Modulation::Exponential},
                                          {"linear", Modulation::LinearVariant}});
       }},
      {"density.scale_pruning",
       [](CliConfig& c, const Value& v, const Location& at) { c.policy().scale_pruning = as_bool(v, at); }},
      {"density.scale_source",
       [](CliConfig& c, const Value& v, const Location& at) {
         c.policy().scale_source = as_enum<ScaleSource>(
             v, at, {{"offset_mean", ScaleSource::OffsetMean}, {"covariance_scale", ScaleSource::CovarianceScale}});
       }},
      {"density.max_primitives",
       [](CliConfig& c, const Value& v, const Location& at) {
         c.policy().max_primitives = static_cast<std::size_t>(as_count(v, at));
       }},

      {"mask.eta", number_in(&CliConfig::mask, &MaskConfig::eta)},
      {"mask.epsilon", number_in(&CliConfig::mask, &MaskConfig::epsilon)},

      {"experiment.iterations_per_frame",
       [](CliConfig& c, const Value& v, const Location& at) {
         c.experiment.iterations_per_frame = static_cast<std::size_t>(as_count(v, at));
       }},
      {"experiment.densify_interval",
       [](CliConfig& c, const Value& v, const Location& at) {
         c.experiment.densify_interval = static_cast<std::size_t>(as_count(v, at));
       }},
      {"experiment.grid_pitch", number(&ExperimentConfig::grid_pitch)},
      {"experiment.initial_opacity", number(&ExperimentConfig::initial_opacity)},
      {"experiment.seed",
       [](CliConfig& c, const Value& v, const Location& at) { c.experiment.seed = as_count(v, at); }},
      {"experiment.lr_mean", learning_rate(&LearningRates::mean)},
      {"experiment.lr_scale", learning_rate(&LearningRates::scale)},
      {"experiment.lr_rotation", learning_rate(&LearningRates::rotation)},
      {"experiment.lr_opacity", learning_rate(&LearningRates::opacity)},
      {"experiment.lr_color", learning_rate(&LearningRates::color)},

      {"synthetic.width", synthetic(&SyntheticConfig::width)},
      {"synthetic.height", synthetic(&SyntheticConfig::height)},
      {"synthetic.frames", synthetic(&SyntheticConfig::frames)},
      {"synthetic.gop", synthetic(&SyntheticConfig::gop)},
      {"synthetic.i_frame_qp", synthetic(&SyntheticConfig::i_frame_qp)},
      {"synthetic.base_qp", synthetic(&SyntheticConfig::base_qp)},
      {"synthetic.qp_ramp", synthetic(&SyntheticConfig::qp_ramp)},
      {"synthetic.pan_per_frame", synthetic(&SyntheticConfig::pan_per_frame)},
      {"synthetic.bits_per_energy", synthetic(&SyntheticConfig::bits_per_energy)},
      {"synthetic.keypoints", synthetic(&SyntheticConfig::keypoints)},
      {"synthetic.gap_scale_db", synthetic(&SyntheticConfig::gap_scale_db)},
  };
  return table;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

Value parse_value(std::string_view text, const Location& at) {
  if (text.empty()) fail(at, "missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') fail(at, "unterminated string");
    const std::string_view body = text.substr(1, text.size() - 2);
    if (body.find_first_of("\"\\") != std::string_view::npos) fail(at, "escapes are not supported");
    return std::string(body);
  }
  if (text == "true") return true;
  if (text == "false") return false;
  std::string digits;
  for (char c : text) {
    if (c != '_') digits.push_back(c);
  }
  const char* first = digits.data() + (!digits.empty() && digits.front() == '+' ? 1 : 0);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) {
    fail(at, "cannot parse value '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

CliConfig parse_config(std::string_view text, CliConfig base) {
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail({line_no, std::string(line)}, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      const std::string prefix = section + ".";
      const auto known = setters().lower_bound(prefix);
      if (known == setters().end() || known->first.compare(0, prefix.size(), prefix) != 0) {
        fail({line_no, section}, "unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail({line_no, section}, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const Location at{line_no, section.empty() ? key : section + "." + key};
    const auto it = setters().find(at.path);
    if (it == setters().end()) fail(at, "unknown setting");
    it->second(base, parse_value(trim(line.substr(eq + 1)), at), at);
  }
  return base;
}

CliConfig load_config(const std::filesystem::path& path, CliConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

void check(const CliConfig& cfg) {
  check(cfg.experiment);
  const auto& s = cfg.synthetic;
  if (s.width < 8 || s.height < 8) throw Error(Errc::InvalidConfig, "synthetic canvas must be at least 8x8");
  if (s.frames == 0 || s.gop == 0) throw Error(Errc::InvalidConfig, "synthetic frames and gop must be >= 1");
  if (!(s.bits_per_energy > 0.0 && s.gap_scale_db > 0.0)) {
    throw Error(Errc::InvalidConfig, "bits_per_energy and gap_scale_db must be positive");
  }
}

std::string to_toml(const CliConfig& cfg) {
  const auto& sc = cfg.scoring();
  const auto& po = cfg.policy();
  const auto& ma = cfg.mask();
  const auto& ex = cfg.experiment;
  const auto& sy = cfg.synthetic;
  auto q = [](const char* s) { return std::string("\"") + s + "\""; };
  auto f = [](double v) { return format_double(v); };
  std::ostringstream os;
  os << "[scoring]\n"
     << "lambda_q = " << f(sc.lambda_q) << "\n"
     << "lambda_b = " << f(sc.lambda_b) << "\n"
     << "epsilon = " << f(sc.epsilon) << "\n"
     << "beta = " << f(sc.beta) << "\n"
     << "variant = " << q(sc.variant == ScoringVariant::Sigmoid ? "sigmoid" : "linear") << "\n"
     << "ema_init = " << q(sc.ema_init == EmaInit::Zero ? "zero" : "first") << "\n";
  if (sc.tau) os << "tau = " << f(*sc.tau) << "\n";
  if (sc.rho) os << "rho = " << f(*sc.rho) << "\n";
  const char* modulation = po.modulation == Modulation::Fixed           ? "fixed"
                           : po.modulation == Modulation::LinearVariant ? "linear"
                                                                        : "exponential";
  os << "\n[density]\n"
     << "theta0 = " << f(po.theta0) << "\n"
     << "omega0 = " << f(po.omega0) << "\n"
     << "modulation = " << q(modulation) << "\n"
     << "alpha_lin = " << f(po.alpha_lin) << "\n"
     << "scale_pruning = " << (po.scale_pruning ? "true" : "false") << "\n"
     << "scale_source = "
     << q(po.scale_source == ScaleSource::CovarianceScale ? "covariance_scale" : "offset_mean") << "\n"
     << "max_primitives = " << po.max_primitives << "\n"
     << "\n[mask]\n"
     << "eta = " << f(ma.eta) << "\n"
     << "epsilon = " << f(ma.epsilon) << "\n"
     << "\n[experiment]\n"
     << "iterations_per_frame = " << ex.iterations_per_frame << "\n"
     << "densify_interval = " << ex.densify_interval << "\n"
     << "grid_pitch = " << f(ex.grid_pitch) << "\n"
     << "initial_opacity = " << f(ex.initial_opacity) << "\n"
     << "seed = " << ex.seed << "\n"
     << "lr_mean = " << f(ex.lr.mean) << "\n"
     << "lr_scale = " << f(ex.lr.scale) << "\n"
     << "lr_rotation = " << f(ex.lr.rotation) << "\n"
     << "lr_opacity = " << f(ex.lr.opacity) << "\n"
     << "lr_color = " << f(ex.lr.color) << "\n"
     << "\n[synthetic]\n"
     << "width = " << sy.width << "\n"
     << "height = " << sy.height << "\n"
     << "frames = " << sy.frames << "\n"
     << "gop = " << sy.gop << "\n"
     << "i_frame_qp = " << f(sy.i_frame_qp) << "\n"
     << "base_qp = " << f(sy.base_qp) << "\n"
     << "qp_ramp = " << f(sy.qp_ramp) << "\n"
     << "pan_per_frame = " << f(sy.pan_per_frame) << "\n"
     << "bits_per_energy = " << f(sy.bits_per_energy) << "\n"
     << "keypoints = " << sy.keypoints << "\n"
     << "gap_scale_db = " << f(sy.gap_scale_db) << "\n";
  return os.str();
}

}  // namespace cadc
