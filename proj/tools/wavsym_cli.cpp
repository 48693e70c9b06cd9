#include "wavsym/cli.hpp"
#include "wavsym/common.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

constexpr const char* thread_env = "WAVSYM_THREADS";

void set_threads(int flag) {
  int n = flag;
  if (n <= 0) {
    if (const char* e = std::getenv(thread_env)) n = std::atoi(e);
  }
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet analysis of pseudodifferential symbols"};
  app.require_subcommand(1);
  app.fallthrough(); // options may follow the verb
  std::string config, out = "wavsym_out";
  long long seed = -1;
  int threads = 0;
  app.add_option("--config", config, "JSON run config")->required();
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads; WAVSYM_THREADS is used when absent");

  for (const char* c : {"analyze", "classify", "kernel", "norm-study", "counterexample", "lemma6", "validate"})
    app.add_subcommand(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : static_cast<int>(wavsym::ErrorCode::config);
  }
  const std::string verb = app.get_subcommands().front()->get_name();
  set_threads(threads);

  try {
    if (verb == "validate") {
      const auto d = wavsym::validate_file(config);
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& x : d) arr.push_back(x.to_json());
      std::cout << arr.dump(2) << '\n';
      return d.empty() ? 0 : static_cast<int>(wavsym::ErrorCode::config);
    }
    nlohmann::json cfg = wavsym::load_config(config);
    if (cfg.contains("command") && cfg["command"] != verb)
      wavsym::fail(wavsym::ErrorCode::config, "config command '" + cfg["command"].get<std::string>() +
                                                  "' does not match verb '" + verb + "'");
    cfg["command"] = verb;
    if (seed >= 0) cfg["seed"] = seed;
    const auto rep = wavsym::run(cfg);
    wavsym::write_report(rep, out);
    std::cout << out << "/report.json\n";
    return 0;
  } catch (const wavsym::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
