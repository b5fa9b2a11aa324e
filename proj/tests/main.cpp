#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "ludor/error.hpp"

int main(int argc, char** argv) {
    ludor::set_warnings_enabled(false);
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
