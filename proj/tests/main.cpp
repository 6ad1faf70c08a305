#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <spdlog/spdlog.h>

#include <cstdlib>

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("GSMOTION_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(env));
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
