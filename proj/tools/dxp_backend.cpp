// Reference oracle backend: serves the line protocol on stdin/stdout.

#include <chrono>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dxp/backend.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Reference oracle backend for dxp", "dxp-backend"};
  std::string model_path;
  std::string engine = "exhaustive";
  long delay_ms = 0;
  app.add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
  app.add_option("--oracle", engine, "exhaustive or auto")->check(CLI::IsMember({"exhaustive", "auto"}));
  app.add_option("--delay-ms", delay_ms, "artificial latency per answer")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    dxp::BackendOptions opts;
    opts.engine = engine == "auto" ? dxp::BackendOptions::Engine::Auto : dxp::BackendOptions::Engine::Exhaustive;
    opts.delay = std::chrono::milliseconds(delay_ms);
    dxp::Backend backend(dxp::load_model(model_path), std::cout, opts);
    backend.serve(std::cin);
  } catch (const std::exception& e) {
    std::cerr << "dxp-backend: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
