#include "config.hpp"
#include "pipeline.hpp"
#include "plot.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

std::string kind_label(jcl::app::ParamKind k) {
  using jcl::app::ParamKind;
  switch (k) {
    case ParamKind::Number: return "number";
    case ParamKind::Integer: return "integer";
    case ParamKind::String: return "name";
    case ParamKind::Bool: return "bool";
    case ParamKind::NumberList: return "list";
    case ParamKind::NumberOrName: return "number|name";
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jcl: numerical checks for J-holomorphic curves"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  auto* run = app.add_subcommand("run", "run every check in a config file");
  run->add_option("config", config_path, "experiment config")->required();
  run->add_option("-o,--out", out_override, "output directory (overrides the config)");

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "render SVG plots for a finished run");
  plot->add_option("dir", plot_dir, "output directory of a run")->required();

  bool verbose = false;
  auto* list = app.add_subcommand("list-checks", "list the available checks");
  list->add_flag("-v,--verbose", verbose, "also list parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : jcl::app::kExitError;
  }

  try {
    if (*run) {
      auto cfg = jcl::app::parse_config_file(config_path);
      std::filesystem::path out = out_override.empty() ? cfg.output : out_override;
      auto res = jcl::app::run_experiment(cfg, out, std::cout);
      return res.exit_code;
    }
    if (*plot) {
      for (const auto& p : jcl::app::plot_reports(plot_dir)) std::cout << p.string() << "\n";
      return jcl::app::kExitPass;
    }
    for (const auto& c : jcl::app::check_registry()) {
      std::cout << c.name << "  [" << c.anchor << "]  " << c.description << "\n";
      if (verbose)
        for (const auto& p : c.params)
          std::cout << "    " << p.key << " (" << kind_label(p.kind) << "): " << p.help << "\n";
    }
    return jcl::app::kExitPass;
  } catch (const jcl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return jcl::app::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return jcl::app::kExitError;
  }
}
