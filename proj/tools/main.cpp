#include <cstdio>

int main() {
  std::puts("wctdef: cli under construction");
  return 0;
}
