// Acceptance criteria runner; each criterion prints one pass/fail line.
// Placeholder until the model / training stack lands.
#include <cstdio>

int main() {
  std::printf("acceptance: no criteria wired yet\n");
  return 1;
}
