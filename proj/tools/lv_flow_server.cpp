// Line-protocol flow server for the switched Lotka-Volterra plant.
//   usage: lv_flow_server [a b c d [max_substep]]
// Prints "HELLO 2 1 2", then answers "STEP <mode> <x1> <x2> <u> <dt>" with the next state.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include "switchcert/errors.hpp"
#include "switchcert/flow.hpp"

int main(int argc, char** argv) {
  double p[4] = {1.0, 1.0, 1.0, 1.0};
  double substep = 1e-3;
  if (argc != 1 && argc != 5 && argc != 6) {
    std::cerr << "usage: lv_flow_server [a b c d [max_substep]]\n";
    return 2;
  }
  for (int i = 1; i < argc; ++i) {
    const double v = std::strtod(argv[i], nullptr);
    if (i <= 4) p[i - 1] = v;
    else substep = v;
  }
  auto flow = switchcert::builtin_lotka_volterra(p[0], p[1], p[2], p[3], substep);

  std::printf("HELLO 2 1 2\n");
  std::fflush(stdout);
  std::string line;
  while (std::getline(std::cin, line)) {
    std::istringstream in(line);
    std::string tag;
    int mode = 0;
    switchcert::Vec x(2), u(1);
    double dt = 0.0;
    in >> tag >> mode >> x[0] >> x[1] >> u[0] >> dt;
    if (tag != "STEP" || in.fail() || mode < 1 || mode > 2) {
      std::printf("ERROR malformed request\n");
      std::fflush(stdout);
      continue;
    }
    try {
      const switchcert::Vec next =
          flow->step(static_cast<std::size_t>(mode - 1), x, u, switchcert::Vec::Zero(1), dt);
      std::printf("%.17g %.17g\n", next[0], next[1]);
    } catch (const std::exception& e) {
      std::printf("ERROR %s\n", e.what());
    }
    std::fflush(stdout);
  }
  return 0;
}
