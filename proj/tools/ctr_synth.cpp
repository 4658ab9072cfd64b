// Emits deterministic Criteo-format sample data for demos and tests.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "ctr/synthetic.hpp"

#include "CLI11.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic Criteo-format data generator"};
  std::size_t rows = 10000;
  std::uint64_t seed = 7;
  std::string output;
  bool xor_task = false;
  app.add_option("-n,--rows", rows, "number of rows")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "generator seed");
  app.add_option("-o,--output", output, "output path (default: stdout)");
  app.add_flag("--xor", xor_task,
               "emit the two-field XOR task instead of the CTR-like task");
  CLI11_PARSE(app, argc, argv);

  const auto emit = [&](std::ostream& out) {
    if (xor_task) {
      ctr::write_xor_tsv(out, rows, seed);
    } else {
      ctr::write_synthetic_criteo(out, rows, seed);
    }
  };

  if (output.empty()) {
    emit(std::cout);
  } else {
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) {
      std::cerr << "cannot open " << output << "\n";
      return 2;
    }
    emit(out);
  }
  return 0;
}
