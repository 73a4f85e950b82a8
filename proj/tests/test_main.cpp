#define CATCH_CONFIG_RUNNER
#include <catch2/catch.hpp>

#include "mmce/bench.hpp"

int main(int argc, char* argv[])
{
  mmce::limit_blas_threads();
  return Catch::Session().run(argc, argv);
}
