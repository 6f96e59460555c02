// hybridmesh CLI; subcommands land as the library modules do.
#include <cstdio>

int main() {
  std::printf("hybridmesh: no subcommands wired yet\n");
  return 1;
}
