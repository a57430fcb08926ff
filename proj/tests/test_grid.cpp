#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ldeq/grid.hpp"
#include "ldeq/rng.hpp"

using namespace ldeq;

namespace {

Grid random_grid(std::vector<std::size_t> shape, std::uint64_t seed) {
    Grid g(shape);
    SplitMix64 rng(seed);
    for (double& v : g.values()) v = rng.uniform(-3.0, 3.0);
    return g;
}

std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("norm2") {
    CHECK(norm2(Grid({2}, {3.0, 4.0})) == doctest::Approx(5.0));
    CHECK(norm2(Grid({4, 4}, 0.0)) == 0.0);
    CHECK(norm2(Grid({16}, std::vector<double>(16, 0.25))) == doctest::Approx(1.0));
    CHECK_THROWS_WITH(norm2(Grid()), "empty operand");
}

TEST_CASE("axpy") {
    Grid x({2}, {1.0, 2.0});
    Grid y({2}, {3.0, 4.0});
    Grid r = axpy(2.0, x, y);
    CHECK(r[0] == 5.0);
    CHECK(r[1] == 8.0);
    // inputs unmodified
    CHECK(x[0] == 1.0);
    CHECK(y[0] == 3.0);

    Grid zero = axpy(0.0, x, y);
    CHECK(zero.values() == y.values());
    Grid copy = axpy(1.0, x, Grid({2}, 0.0));
    CHECK(copy.values() == x.values());
    CHECK_THROWS(axpy(1.0, x, Grid({3}, 0.0)));
}

TEST_CASE("axpy/norm2 cancellation property") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Grid x = random_grid({3, 5}, s);
        CHECK(norm2(axpy(-1.0, x, x)) == 0.0);
    }
}

TEST_CASE("reduce_max") {
    CHECK(reduce_max(Grid({3}, {1.0, 7.0, 3.0})) == 7.0);
    auto per = reduce_max_per_channel(Grid({2, 2}, {0.0, 1.0, 5.0, 2.0}));
    CHECK(per == std::vector<double>{1.0, 5.0});
    CHECK(reduce_max(Grid({4}, std::vector<double>(4, 2.5))) == 2.5);
    CHECK_THROWS(reduce_max(Grid()));
}

TEST_CASE("reduce_max per-channel on single channel equals global") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Grid g = random_grid({1, 4, 4}, 100 + s);
        CHECK(reduce_max_per_channel(g)[0] == reduce_max(g));
    }
}

TEST_CASE("grid io round trip is bit exact") {
    std::string path = tmp_path("ldeq_roundtrip.eqg");
    for (std::uint64_t s = 0; s < 5; ++s) {
        Grid g = random_grid({2, 3, 4}, 200 + s);
        write_grid(path, g);
        Grid back = read_grid(path);
        CHECK(back.shape() == g.shape());
        CHECK(back.values() == g.values());
    }
    std::filesystem::remove(path);
}

TEST_CASE("grid io error paths") {
    std::string path = tmp_path("ldeq_bad.eqg");
    { std::ofstream f(path); }
    CHECK_THROWS_WITH_AS(read_grid(path), doctest::Contains("malformed header"),
                         std::runtime_error);

    // Header claims 10 elements, only 9 present.
    {
        std::ofstream f(path, std::ios::binary);
        f.write("EQG1", 4);
        unsigned char rank[4] = {1, 0, 0, 0};
        unsigned char dim[4] = {10, 0, 0, 0};
        f.write(reinterpret_cast<char*>(rank), 4);
        f.write(reinterpret_cast<char*>(dim), 4);
        std::vector<char> payload(9 * 8, 0);
        f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    CHECK_THROWS_WITH_AS(read_grid(path), doctest::Contains("truncated payload"),
                         std::runtime_error);

    // Dimensions whose product overflows.
    {
        std::ofstream f(path, std::ios::binary);
        f.write("EQG1", 4);
        unsigned char rank[4] = {4, 0, 0, 0};
        f.write(reinterpret_cast<char*>(rank), 4);
        unsigned char dim[4] = {0xFF, 0xFF, 0xFF, 0xFF};
        for (int i = 0; i < 4; ++i) f.write(reinterpret_cast<char*>(dim), 4);
    }
    CHECK_THROWS_WITH_AS(read_grid(path), doctest::Contains("dimension overflow"),
                         std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("param vector segments") {
    ParamVector p;
    p.add_segment("a", {2, 3});
    p.add_segment("b", {4});
    CHECK(p.size() == 10);
    CHECK(p.segment("b").offset == 6);
    CHECK_THROWS(p.segment("c"));
    // segments are contiguous and cover the array
    std::size_t end = 0;
    for (const auto& s : p.segments()) {
        CHECK(s.offset == end);
        end = s.offset + s.size;
    }
    CHECK(end == p.size());
}
