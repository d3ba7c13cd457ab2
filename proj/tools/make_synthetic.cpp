// Writes a planted-partition HIN document.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lamp/error.hpp"
#include "lamp/eval.hpp"

int main(int argc, char** argv) {
  CLI::App app{"make_synthetic: planted-partition HIN generator"};
  lamp::SyntheticOptions opts;
  std::string out;
  app.add_option("--targets", opts.n_target, "Target nodes")->capture_default_str();
  app.add_option("--classes", opts.classes, "Classes")->capture_default_str();
  app.add_option("--homophily", opts.homophily, "Within-class link probability")->capture_default_str();
  app.add_option("--seed", opts.seed, "Seed")->capture_default_str();
  app.add_option("--out", out, "Output JSON path")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    lamp::save_hin(lamp::make_synthetic_hin(opts), out);
  } catch (const lamp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
