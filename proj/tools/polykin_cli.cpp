// Command-line front end: parses a run configuration, dispatches to one of
// the four run modes, prints the one-line result, and exits 0 only when no
// tracked invariant tripped.  Exit codes: 0 clean, 1 invariant violation,
// 2 usage/config error, 3 integration failure.
#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "polykin/config.hpp"
#include "polykin/runner.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  bool second_order = false;
  bool strict_h = false;
};

void add_common_options(CLI::App* sub, CliState& st) {
  sub->add_option("--config", st.config_path, "run configuration file (INI format)")
      ->required();
  sub->add_option("--out", st.out_dir,
                  "directory for artifacts (moments.csv, summary.json); created if absent");
  sub->add_option("--threads", st.threads, "worker threads for the inner loops (default 1)")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--second-order", st.second_order,
                "minmod-limited second-order reconstruction (transport runs)");
  sub->add_flag("--strict-h", st.strict_h,
                "stop the run at the first entropy-increase violation (relax runs)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polykin: two-species polyatomic ES-BGK relaxation and transport"};
  app.require_subcommand(1);
  CliState st;

  CLI::App* relax = app.add_subcommand("relax", "space-homogeneous relaxation (full model)");
  CLI::App* transport =
      app.add_subcommand("transport1d", "1-D finite-volume transport (reduced model)");
  CLI::App* chu = app.add_subcommand("chu-compare",
                                     "integrate full and reduced models side by side");
  CLI::App* validate = app.add_subcommand("validate-closure",
                                          "closure admissibility and exchange-balance report");
  for (CLI::App* sub : {relax, transport, chu, validate}) add_common_options(sub, st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const polykin::ParseResult parsed = polykin::load_config_file(st.config_path);
  for (const std::string& w : parsed.warnings) std::cerr << "warning: " << w << "\n";
  if (!parsed.ok) {
    std::cerr << "config error" << (parsed.errors.size() > 1 ? "s" : "") << " in '"
              << st.config_path << "':\n";
    for (const std::string& e : parsed.errors) std::cerr << "  - " << e << "\n";
    return 2;
  }

  polykin::RunnerOptions opts;
  opts.out_dir = st.out_dir;
  opts.threads = st.threads;
  opts.second_order = st.second_order;
  opts.strict_h = st.strict_h;

  polykin::RunOutcome outcome;
  if (relax->parsed()) {
    outcome = polykin::run_relax(parsed.config, opts);
  } else if (transport->parsed()) {
    outcome = polykin::run_transport1d(parsed.config, opts);
  } else if (chu->parsed()) {
    outcome = polykin::run_chu_compare(parsed.config, opts);
  } else {
    outcome = polykin::run_validate_closure(parsed.config, opts, std::cout);
  }

  std::cout << outcome.headline << "\n";
  if (outcome.status != "ok") std::cerr << "status: " << outcome.status << "\n";
  return outcome.exit_code;
}
