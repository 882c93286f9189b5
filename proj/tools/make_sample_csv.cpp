// Writes the bundled demo forecast stream (data/sample_forecasts.csv).
//
//   make_sample_csv [seed] > data/sample_forecasts.csv

#include <cstdlib>
#include <iostream>

#include "crpsagg/cli.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 2014;
  crpsagg::write_sample_forecasts(std::cout, seed);
  return 0;
}
