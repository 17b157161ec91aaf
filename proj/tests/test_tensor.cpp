#include <catch2/catch_amalgamated.hpp>

#include "duet/common.hpp"
#include "duet/tensor.hpp"

using duet::nn::Tensor;

TEST_CASE("tensor construction zero-fills", "[tensor]") {
    Tensor t({2, 3});
    REQUIRE(t.numel() == 6);
    REQUIRE(t.ndim() == 2);
    REQUIRE(t.dim(0) == 2);
    REQUIRE(t.dim(1) == 3);
    for (std::size_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == 0.0);
}

TEST_CASE("tensor data constructor checks element count", "[tensor]") {
    REQUIRE_NOTHROW(Tensor({2, 2}, {1, 2, 3, 4}));
    REQUIRE_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), duet::DimensionError);
}

TEST_CASE("row-major indexing", "[tensor]") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    REQUIRE(t.at2(0, 0) == 1.0);
    REQUIRE(t.at2(0, 2) == 3.0);
    REQUIRE(t.at2(1, 0) == 4.0);
    REQUIRE(t.at2(1, 2) == 6.0);
    Tensor u({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    REQUIRE(u.at3(1, 0, 1) == 6.0);
    REQUIRE(u.at3(0, 1, 0) == 3.0);
}

TEST_CASE("reshape preserves data and checks count", "[tensor]") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = t.reshaped({3, 2});
    REQUIRE(r.at2(2, 1) == 6.0);
    REQUIRE_THROWS_AS(t.reshaped({4, 2}), duet::DimensionError);
}

TEST_CASE("bit_equal distinguishes signed zero from rounding noise", "[tensor]") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({2}, {1.0, 2.0});
    REQUIRE(duet::nn::bit_equal(a, b));
    b[1] = 2.0 + 1e-16;
    REQUIRE(duet::nn::bit_equal(a, b));  // rounds back to 2.0 exactly
    b[1] = 2.0000000001;
    REQUIRE_FALSE(duet::nn::bit_equal(a, b));
}

TEST_CASE("max_abs_diff", "[tensor]") {
    Tensor a({3}, {1.0, 2.0, 3.0});
    Tensor b({3}, {1.0, 2.5, 2.0});
    REQUIRE(duet::nn::max_abs_diff(a, b) == 1.0);
}

TEST_CASE("double text round-trip is exact", "[common]") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, -0.0625}) {
        std::string s = duet::format_double(v);
        REQUIRE(duet::parse_double(s) == v);
    }
    REQUIRE_THROWS_AS(duet::parse_double("bogus"), duet::ParseError);
}
