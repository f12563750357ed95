#include <filesystem>
#include <functional>
#include <ostream>

#include "CLI11.hpp"

#include "abfkit/error.hpp"
#include <map>
#include "abfkit/pipeline.hpp"

namespace abfkit {

namespace {

struct CliArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::string out = "out";
};

// Runs one stage, prefixing any library error with the stage name.
template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), stage + ": " + e.what());
  }
}

int run_command(const std::string& command, const CliArgs& args, std::ostream& out,
                std::ostream& err) {
  ConfigOverrides overrides{args.profile, args.seed};
  RunConfig config = staged("config", [&] { return load_config_file(args.config, overrides); });
  if (config.profile == "paper" && (command == "certify" || command == "pipeline"))
    err << "warning: the paper profile collects the full published sample count; "
           "expect a run of hours and several GB of memory\n";

  Pipeline pipeline(std::move(config), args.out, out);
  int code = kExitOk;
  try {
    if (command == "abstract") {
      staged("abstract", [&]() -> auto& { return pipeline.abstraction(); });
    } else if (command == "complexity") {
      staged("complexity", [&]() -> auto& { return pipeline.complexity(); });
    } else if (command == "certify") {
      const auto& c = staged("certify", [&]() -> auto& { return pipeline.certify(); });
      if (!c.verdict.certified) code = kExitRejected;
    } else if (command == "synthesize") {
      const auto& s = staged("synthesize", [&]() -> auto& { return pipeline.synthesize(); });
      if (s.controller.empty()) code = kExitSynthesisFailed;
    } else {
      staged("abstract", [&]() -> auto& { return pipeline.abstraction(); });
      staged("complexity", [&]() -> auto& { return pipeline.complexity(); });
      const auto& c = staged("certify", [&]() -> auto& { return pipeline.certify(); });
      if (!c.verdict.certified) {
        code = kExitRejected;
      } else {
        const auto& s = staged("synthesize", [&]() -> auto& { return pipeline.synthesize(); });
        if (s.controller.empty()) code = kExitSynthesisFailed;
      }
    }
  } catch (...) {
    pipeline.write_reports(command);
    throw;
  }
  pipeline.write_reports(command);
  if (code == kExitRejected) err << "verdict: rejected (no certificate)\n";
  if (code == kExitSynthesisFailed) err << "synthesis: the winning set is empty\n";
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-driven abstraction-based certificates and safety controllers", "abfkit"};
  app.require_subcommand(1);
  CliArgs args;
  std::string command;
  for (const char* name : {"abstract", "complexity", "certify", "synthesize", "pipeline"}) {
    static const std::map<std::string, std::string> help = {
        {"abstract", "build the finite abstraction"},
        {"complexity", "compute the minimum number of samples"},
        {"certify", "collect data, solve the scenario program and issue a verdict"},
        {"synthesize", "synthesize a safety controller and simulate the closed loop"},
        {"pipeline", "run every stage in order"}};
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", args.config, "configuration file")->required();
    sub->add_option("--seed", args.seed, "override the configured seed");
    sub->add_option("--profile", args.profile, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    sub->add_option("--out", args.out, "output directory")->capture_default_str();
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    return run_command(command, args, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "] " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error [internal] " << e.what() << '\n';
    return kExitCrash;
  }
}

}  // namespace abfkit
