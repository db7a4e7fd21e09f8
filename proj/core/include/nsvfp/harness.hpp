#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsvfp {

enum class Campaign { coercivity, mode_decay, whole_space, torus_linear, nonlinear };

std::string campaign_name(Campaign c);
/// Throws ConfigError for unknown names.
Campaign parse_campaign(const std::string& name);
const std::vector<Campaign>& all_campaigns();

/// Invalid configuration; `key` names the offending entry (empty when the
/// problem is not tied to one key).
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

private:
  std::string key_;
};

/// Resource bound declared by budget_seconds was exceeded.
class BudgetExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  std::string name;
  std::string fallback; // default value as text
  double lo = 0.0;
  double hi = 0.0;
  bool integer = false;
  std::string help;
};

/// Keys accepted by a campaign, common keys first.
std::vector<ConfigKey> config_schema(Campaign c);
/// Human-readable schema listing.
std::string describe_schema(Campaign c);

/// Flat key = value configuration with every key resolved to a value.
struct ExperimentConfig {
  Campaign campaign = Campaign::coercivity;
  std::map<std::string, std::string> values;

  double number(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t seed() const;
  int threads() const { return integer("threads"); }
  std::string out() const;
};

/// Parses "key = value" lines ('#' starts a comment). `campaign` is required;
/// unknown keys, duplicates and out-of-range values throw ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Defaults for a campaign, as if only `campaign` had been given.
ExperimentConfig default_config(Campaign c);
/// Validated single-key override.
void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct Verdict {
  enum class Kind { within, above, below };
  std::string name;
  std::string symbol; // target quantity, e.g. sigma_{1,0}
  double target = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;
  Kind kind = Kind::within;

  /// within: |measured - target| <= tolerance; above: measured > target;
  /// below: measured < target.
  bool pass() const;
};

std::string verdict_table(const std::vector<Verdict>& verdicts);

struct Series {
  std::string name; // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Plot {
  std::string name; // file stem
  std::string title, xlabel, ylabel;
  bool log_x = false;
  bool log_y = true;
  bool scatter = false; // markers instead of a connected line
  std::vector<double> x, y;
  std::vector<double> fit_x, fit_y;
  std::string annotation;
};

struct CampaignResult {
  Campaign campaign = Campaign::coercivity;
  std::vector<Verdict> verdicts;
  std::vector<Series> series;
  std::vector<Plot> plots;
  std::map<std::string, double> resolution; // grid sizes and orders actually used
  double seconds = 0.0;

  bool all_pass() const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Runs a campaign; throws BudgetExceeded when budget_seconds > 0 is exceeded.
CampaignResult run_campaign(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// CSV with a header row; rejects empty series.
std::string to_csv(const Series& s);
/// Standalone SVG line plot with axis labels, one fit overlay path and the
/// annotation; rejects empty data.
std::string to_svg(const Plot& p);
/// JSON manifest of the configuration, resolutions, verdicts and files.
std::string manifest_json(const CampaignResult& r, const ExperimentConfig& cfg, const std::vector<std::string>& files);

/// Writes every series, plot, the verdict table and the manifest into dir;
/// returns the written file names.
std::vector<std::string> emit_report(const CampaignResult& r, const ExperimentConfig& cfg, const std::string& dir);

} // namespace nsvfp
