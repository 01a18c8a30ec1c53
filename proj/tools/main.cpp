#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "paro/errors.hpp"
#include "paro/runner.hpp"
#include "paro/suites.hpp"

int main(int argc, char** argv) {
  CLI::App app{"paro: adaptive parallel orbital-updating eigenvalue solver"};

  std::string config_path;
  std::string suite_name;
  std::string out_dir;
  int workers = 0;
  app.add_option("-c,--config", config_path, "path to a key = value run configuration");
  app.add_option("-s,--suite", suite_name,
                 "verification suite: analytic | oracle | marking | theorem-a1 | scaling");
  app.add_option("-w,--workers", workers, "worker threads (1 = strictly serial)");
  app.add_option("-o,--out", out_dir, "output directory (overrides the config)");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!suite_name.empty()) {
      const paro::SuiteResult suite = paro::run_named_suite(suite_name, std::max(1, workers));
      for (const auto& check : suite.checks) {
        std::printf("suite=%s check=\"%s\" status=%s measured=\"%s\"\n", suite.name.c_str(),
                    check.name.c_str(), check.pass ? "pass" : "fail", check.measured.c_str());
      }
      std::printf("suite=%s result=%s\n", suite.name.c_str(), suite.pass() ? "pass" : "fail");
      return suite.pass() ? 0 : 1;
    }

    if (config_path.empty()) {
      std::fprintf(stderr, "error: provide --config or --suite (see --help)\n");
      return 2;
    }

    paro::RunConfig config = paro::parse_run_config_file(config_path);
    if (workers > 0) config.paro.workers = workers;
    if (!out_dir.empty()) config.out_dir = out_dir;

    const paro::RunArtifacts artifacts = paro::run_experiment(config);
    std::printf("%s\n", artifacts.summary.c_str());
    return artifacts.converged ? 0 : 1;
  } catch (const paro::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const paro::InvalidArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const paro::NotSpdError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const paro::IterationLimitError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const paro::CapacityError& e) {
    std::fprintf(stderr, "capacity error: %s\n", e.what());
    return 4;
  } catch (const paro::ScfDivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 6;
  }
}
