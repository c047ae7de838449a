#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "loewner/runner.hpp"

namespace {

std::string default_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("LOEWNER_LAB_OUT"); env && *env) return env;
  return ".";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loewner-lab: drivers, Loewner flows, pathwise integrals and estimate checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = 1;
  std::uint64_t seed_offset = 0;
  bool strict = false;

  auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory (or $LOEWNER_LAB_OUT)");
  run->add_option("--threads", threads, "worker threads for Monte Carlo fans");
  run->add_option("--seed-offset", seed_offset, "offset added to every seed");
  run->add_flag("--strict", strict, "fail on any unconverged trace point");

  auto* corpus = app.add_subcommand("corpus", "write the standard driver corpus");
  std::string corpus_out;
  double corpus_T = 1.0;
  int corpus_n = 1 << 12;
  corpus->add_option("--out", corpus_out, "output directory (or $LOEWNER_LAB_OUT)");
  corpus->add_option("--T", corpus_T, "horizon");
  corpus->add_option("--n", corpus_n, "grid steps (power of two)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (corpus->parsed()) {
      if (corpus_n < 8 || (corpus_n & (corpus_n - 1)) != 0) {
        std::cerr << "config error: n must be a power of two >= 8\n";
        return 2;
      }
      const auto manifest = loewner::write_corpus(default_out_dir(corpus_out),
                                                  loewner::TimeGrid::make(corpus_T, corpus_n));
      std::cout << "corpus written: " << manifest.at("drivers").size() << " drivers, hash "
                << manifest.at("corpus_hash").get<std::string>() << "\n";
      return 0;
    }
    loewner::Json cfg_json;
    try {
      cfg_json = loewner::Json::parse(loewner::read_file(config_path));
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    loewner::ExperimentConfig cfg;
    try {
      cfg = loewner::parse_config(cfg_json);
    } catch (const loewner::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    loewner::RunOptions opt;
    opt.out_dir = default_out_dir(!out_dir.empty() ? out_dir : cfg.out_dir);
    opt.threads = threads;
    opt.seed_offset = seed_offset;
    opt.strict = strict;
    const int rc = loewner::run_experiment(cfg, opt);
    std::cout << cfg.experiment << "-" << cfg.hash() << (rc == 0 ? ": pass" : ": FAIL") << "\n";
    return rc;
  } catch (const loewner::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
