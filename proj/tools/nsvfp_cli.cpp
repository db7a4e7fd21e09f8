#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "nsvfp/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string seed;
  std::string threads;
  std::vector<std::string> overrides;
  bool schema = false;
};

/// Exit codes: 0 all verdicts pass, 1 a verdict failed or the budget ran out,
/// 2 invalid configuration.
int run(nsvfp::Campaign campaign, const Options& o) {
  using namespace nsvfp;
  if (o.schema) {
    std::cout << "keys for " << campaign_name(campaign) << ":\n" << describe_schema(campaign);
    return 0;
  }
  ExperimentConfig cfg;
  try {
    if (o.config.empty()) {
      cfg = default_config(campaign);
    } else {
      cfg = load_config(o.config);
      if (cfg.campaign != campaign)
        throw ConfigError("campaign", "config file declares campaign '" + campaign_name(cfg.campaign) +
                                          "' but the subcommand is '" + campaign_name(campaign) + "'");
    }
    for (const auto& kv : o.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("", "--set expects key=value, got '" + kv + "'");
      set_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!o.seed.empty()) set_value(cfg, "seed", o.seed);
    if (!o.threads.empty()) set_value(cfg, "threads", o.threads);
    if (!o.out.empty()) set_value(cfg, "out", o.out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  std::string dir = cfg.out();
  if (dir.empty()) {
    const char* env = std::getenv("NSVFP_OUT");
    dir = (std::filesystem::path(env && *env ? env : "nsvfp-out") / campaign_name(campaign)).string();
  }
  try {
    const auto result = run_campaign(cfg, [](const std::string& msg) { std::cerr << "  " << msg << "\n"; });
    emit_report(result, cfg, dir);
    std::cout << verdict_table(result.verdicts) << "outputs in " << dir << "\n";
    return result.all_pass() ? 0 : 1;
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return 1;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral simulator and verification harness for the linearized and nonlinear "
               "Navier-Stokes / Vlasov-Fokker-Planck system"};
  app.require_subcommand(1);
  Options opt;
  nsvfp::Campaign chosen = nsvfp::Campaign::coercivity;
  for (nsvfp::Campaign c : nsvfp::all_campaigns()) {
    auto* sub = app.add_subcommand(nsvfp::campaign_name(c), "run the " + nsvfp::campaign_name(c) + " campaign");
    sub->add_option("--config", opt.config, "flat key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (overrides the config and NSVFP_OUT)");
    sub->add_option("--seed", opt.seed, "random seed");
    sub->add_option("--threads", opt.threads, "worker threads");
    sub->add_option("--set", opt.overrides, "override a config key, key=value (repeatable)");
    sub->add_flag("--schema", opt.schema, "list accepted keys and exit");
    sub->callback([&chosen, c] { chosen = c; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return run(chosen, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
