#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "hierrate/errors.hpp"

int main(int argc, char** argv) {
  using namespace hierrate;
  CLI::App app{"Hierarchical credibility and GLM ratemaking"};
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  auto run = cli::register_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }
  try {
    return run();
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kData;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kData;
  }
}
