#include "edgesem/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "csv.hpp"
#include "edgesem/errors.hpp"

namespace edgesem {

namespace {

struct Entry {
  const char* key;
  bool fingerprinted;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

double to_real(const std::string& v) {
  const auto d = csv::parse_double(v);
  if (!d) throw ConfigError("expected a number, got '" + v + "'");
  return *d;
}

std::uint64_t to_unsigned(const std::string& v) {
  const std::string_view t = csv::trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& v) {
  const std::uint64_t u = to_unsigned(v);
  if (u > 1000000000ULL) throw ConfigError("integer out of range: '" + v + "'");
  return static_cast<int>(u);
}

bool to_bool(const std::string& v) {
  const std::string_view t = csv::trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::vector<double> to_reals(const std::string& v) {
  std::vector<double> out;
  for (const auto& part : csv::split_line(v)) out.push_back(to_real(part));
  return out;
}

template <class Field>
Entry real(const char* key, bool fp, Field field) {
  return {key, fp, [field](const RunConfig& c) { return csv::format_real(field(const_cast<RunConfig&>(c))); },
          [field](RunConfig& c, const std::string& v) { field(c) = to_real(v); }};
}

template <class Field>
Entry integer(const char* key, bool fp, Field field) {
  return {key, fp,
          [field](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); },
          [field](RunConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(field(c))>;
            if constexpr (std::is_same_v<T, std::uint64_t>) {
              field(c) = to_unsigned(v);
            } else {
              field(c) = static_cast<T>(to_int(v));
            }
          }};
}

template <class Field>
Entry boolean(const char* key, bool fp, Field field) {
  return {key, fp,
          [field](const RunConfig& c) { return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [field](RunConfig& c, const std::string& v) { field(c) = to_bool(v); }};
}

template <class Field>
Entry text(const char* key, bool fp, Field field) {
  return {key, fp,
          [field](const RunConfig& c) { return std::string(field(const_cast<RunConfig&>(c))); },
          [field](RunConfig& c, const std::string& v) { field(c) = std::string(csv::trim(v)); }};
}

#define FIELD(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      text("dataset.preset", true, FIELD(c.dataset_preset)),
      {"dataset.input", false, [](const RunConfig& c) { return c.input.string(); },
       [](RunConfig& c, const std::string& v) { c.input = std::string(csv::trim(v)); }},
      real("graph.window_seconds", true, FIELD(c.window_seconds)),
      text("graph.feature_layout", true, FIELD(c.feature_layout)),
      {"graph.rate_denominator", true,
       [](const RunConfig& c) {
         return std::string(c.rate == RateDenominator::flow_duration ? "flow_duration" : "window_length");
       },
       [](RunConfig& c, const std::string& v) {
         const std::string_view t = csv::trim(v);
         if (t == "flow_duration") c.rate = RateDenominator::flow_duration;
         else if (t == "window_length") c.rate = RateDenominator::window_length;
         else throw ConfigError("rate_denominator must be flow_duration or window_length");
       }},
      real("split.train_fraction", true, FIELD(c.train_fraction)),
      real("features.std_floor", true, FIELD(c.std_floor)),

      integer("model.hidden", true, FIELD(c.dims.hidden)),
      real("model.dropout", true, FIELD(c.dropout)),

      real("train.mask_ratio", true, FIELD(c.train.mask_ratio)),
      real("train.lambda_reg", true, FIELD(c.train.lambda_reg)),
      real("train.lambda_cls", true, FIELD(c.train.lambda_cls)),
      real("train.learning_rate", true, FIELD(c.train.learning_rate)),
      real("train.weight_decay", true, FIELD(c.train.weight_decay)),
      real("train.beta1", true, FIELD(c.train.beta1)),
      real("train.beta2", true, FIELD(c.train.beta2)),
      real("train.adam_eps", true, FIELD(c.train.adam_eps)),
      integer("train.max_epochs", true, FIELD(c.train.max_epochs)),
      integer("train.patience", true, FIELD(c.train.patience)),
      real("train.validation_fraction", true, FIELD(c.train.validation_fraction)),

      real("scoring.alpha", true, FIELD(c.scoring.alpha)),
      real("scoring.tau_mad", true, FIELD(c.scoring.tau_mad)),
      real("scoring.tau_clip", true, FIELD(c.scoring.tau_clip)),
      real("scoring.lambda_src", true, FIELD(c.scoring.lambda_src)),
      real("scoring.lambda_dst", true, FIELD(c.scoring.lambda_dst)),
      {"scoring.aggregation", false, [](const RunConfig& c) { return std::string(to_string(c.aggregation)); },
       [](RunConfig& c, const std::string& v) { c.aggregation = parse_aggregation(std::string(csv::trim(v))); }},
      boolean("scoring.calibrated", false, FIELD(c.calibrated)),
      {"eval.fpr_budgets", false,
       [](const RunConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.fpr_budgets.size(); ++i)
           out += (i ? "," : "") + csv::format_real(c.fpr_budgets[i]);
         return out;
       },
       [](RunConfig& c, const std::string& v) { c.fpr_budgets = to_reals(v); }},

      integer("iforest.trees", true, FIELD(c.iforest.n_trees)),
      integer("iforest.subsample", true, FIELD(c.iforest.subsample)),
      integer("autoencoder.hidden", true, FIELD(c.autoencoder.hidden)),
      integer("autoencoder.latent", true, FIELD(c.autoencoder.latent)),
      integer("autoencoder.epochs", true, FIELD(c.autoencoder.epochs)),
      integer("autoencoder.batch_size", true, FIELD(c.autoencoder.batch_size)),
      real("autoencoder.learning_rate", true, FIELD(c.autoencoder.learning_rate)),

      integer("synth.n_hosts", false, FIELD(c.synth.n_hosts)),
      integer("synth.n_servers", false, FIELD(c.synth.n_servers)),
      real("synth.duration_seconds", false, FIELD(c.synth.duration_seconds)),
      real("synth.web_bytes_mu", false, FIELD(c.synth.profiles[0].bytes.mu)),
      real("synth.web_bytes_sigma", false, FIELD(c.synth.profiles[0].bytes.sigma)),
      real("synth.other_bytes_mu", false, FIELD(c.synth.profiles[2].bytes.mu)),
      real("synth.other_bytes_sigma", false, FIELD(c.synth.profiles[2].bytes.sigma)),
      real("synth.other_mean_duration", false, FIELD(c.synth.profiles[2].mean_duration)),
      real("synth.benign_flow_rate", false, FIELD(c.synth.benign_flow_rate)),
      real("synth.activity_sigma", false, FIELD(c.synth.activity_sigma)),
      integer("synth.n_compromised", false, FIELD(c.synth.n_compromised)),
      real("synth.compromise_start_fraction", false, FIELD(c.synth.compromise_start_fraction)),
      real("synth.c2_period_seconds", false, FIELD(c.synth.c2_period_seconds)),
      real("synth.c2_jitter", false, FIELD(c.synth.c2_jitter)),
      real("synth.c2_bytes", false, FIELD(c.synth.c2_bytes)),
      real("synth.c2_bytes_sd", false, FIELD(c.synth.c2_bytes_sd)),
      real("synth.c2_packets", false, FIELD(c.synth.c2_packets)),
      integer("synth.c2_port", false, FIELD(c.synth.c2_port)),

      integer("seed", true, FIELD(c.seed)),
      {"out_dir", false, [](const RunConfig& c) { return c.out_dir.string(); },
       [](RunConfig& c, const std::string& v) { c.out_dir = std::string(csv::trim(v)); }},
      boolean("plots", false, FIELD(c.plots)),
  };
  return table;
}

#undef FIELD

}  // namespace

void RunConfig::validate() const {
  if (!(window_seconds > 0.0)) throw ConfigError("window_seconds must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must be in (0, 1)");
  if (!(std_floor > 0.0)) throw ConfigError("std_floor must be positive");
  if (dims.hidden < 1) throw ConfigError("model.hidden must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  train.validate();
  scoring.validate();
  for (double b : fpr_budgets)
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("fpr budgets must lie in [0, 1]");
  if (iforest.n_trees < 1 || iforest.subsample < 2)
    throw ConfigError("iforest needs >= 1 tree and subsample >= 2");
  if (autoencoder.hidden < 1 || autoencoder.latent < 1 || autoencoder.epochs < 1 ||
      autoencoder.batch_size < 1 || !(autoencoder.learning_rate > 0.0))
    throw ConfigError("invalid autoencoder settings");
  synth.validate();
}

std::string RunConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const Entry& e : entries()) {
    if (!e.fingerprinted) continue;
    feed(e.key);
    feed("=");
    feed(e.get(*this));
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Entry& e : entries()) {
    if (key == e.key) {
      e.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig config) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view t = csv::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key(csv::trim(t.substr(0, eq)));
    const std::string value(csv::trim(t.substr(eq + 1)));
    try {
      apply_setting(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const Entry& e : entries()) out += std::string(e.key) + " = " + e.get(config) + "\n";
  return out;
}

}  // namespace edgesem
