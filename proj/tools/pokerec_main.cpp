// SPDX-License-Identifier: Apache-2.0
#include <cstdio>

int main() {
  std::puts("pokerec: command-line interface not wired up yet");
  return 0;
}
