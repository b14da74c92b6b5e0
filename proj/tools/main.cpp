#include <string>
#include <vector>

#include "pbrmat/cli.hpp"

int main(int argc, char** argv) {
  return pbrmat::cli::dispatch({argv + 1, argv + argc});
}
