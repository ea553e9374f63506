// Command line front end: kernel-fit, tensor, optimize, geometry-gen.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <scaffold/cli_io.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Periodic cavity shape optimization for prescribed effective tensors"};
  app.require_subcommand(1);

  int degree = 12, samples = 20;
  std::string out, config;
  bool fit_missing = false;

  auto* fit = app.add_subcommand("kernel-fit", "fit the periodic kernel correction and write the cache");
  fit->add_option("--N", degree, "solid harmonics degree")->capture_default_str();
  fit->add_option("--samples", samples, "Gauss points per direction on each face pair")->capture_default_str();
  fit->add_option("--out", out, "cache file")->required();

  auto* tensor = app.add_subcommand("tensor", "print the effective tensor of the configured geometry");
  tensor->add_option("--config", config, "run configuration (JSON)")->required();
  tensor->add_flag("--fit-kernel-if-missing", fit_missing, "fit the kernel when the cache is absent");

  auto* optimize = app.add_subcommand("optimize", "run the shape optimization");
  optimize->add_option("--config", config, "run configuration (JSON)")->required();
  optimize->add_option("--out", out, "output directory (overrides the config)");
  optimize->add_flag("--fit-kernel-if-missing", fit_missing, "fit the kernel when the cache is absent");

  auto* geo = app.add_subcommand("geometry-gen", "write the configured geometry as a geometry file");
  geo->add_option("--config", config, "run configuration (JSON)")->required();
  geo->add_option("--out", out, "geometry file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : scaffold::kExitInput;
  }

  if (*fit) return scaffold::cmd_kernel_fit(degree, samples, out, std::cout, std::cerr);
  if (*tensor) return scaffold::cmd_tensor(config, fit_missing, std::cout, std::cerr);
  if (*optimize) return scaffold::cmd_optimize(config, out, fit_missing, std::cout, std::cerr);
  if (*geo) return scaffold::cmd_geometry_gen(config, out, std::cout, std::cerr);
  return scaffold::kExitInput;
}
