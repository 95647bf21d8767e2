#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstring>
#include <string>

std::string g_cli_path;

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strncmp(argv[i], "--gapcr-cli=", 12) == 0) g_cli_path = argv[i] + 12;
  }
  doctest::Context context;
  context.applyCommandLine(argc, argv);
  return context.run();
}
