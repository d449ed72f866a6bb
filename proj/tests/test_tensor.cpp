#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

#include "nvrd/tensor.hpp"

using nvrd::Tensor;

TEST_CASE("tensor blob header layout is exact") {
    Tensor t({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    std::string bytes = nvrd::encode_blob(t);

    REQUIRE(bytes.size() == 6 + 4 + 8 + 1 + 4 * 6);
    REQUIRE(std::memcmp(bytes.data(), "NVRD1\0", 6) == 0);
    // rank 2, little endian
    REQUIRE(static_cast<unsigned char>(bytes[6]) == 2);
    REQUIRE(static_cast<unsigned char>(bytes[7]) == 0);
    REQUIRE(static_cast<unsigned char>(bytes[8]) == 0);
    REQUIRE(static_cast<unsigned char>(bytes[9]) == 0);
    // dims 2, 3
    REQUIRE(static_cast<unsigned char>(bytes[10]) == 2);
    REQUIRE(static_cast<unsigned char>(bytes[14]) == 3);
    // dtype byte 0 = float32
    REQUIRE(static_cast<unsigned char>(bytes[18]) == 0);
    // first payload value: 1.0f little endian = 00 00 80 3F
    REQUIRE(static_cast<unsigned char>(bytes[19]) == 0x00);
    REQUIRE(static_cast<unsigned char>(bytes[20]) == 0x00);
    REQUIRE(static_cast<unsigned char>(bytes[21]) == 0x80);
    REQUIRE(static_cast<unsigned char>(bytes[22]) == 0x3f);
}

TEST_CASE("tensor blob roundtrips float32-representable values exactly") {
    Tensor t({2, 2, 2}, {0.5, -1.25, 3.0, 0.0, -2.0, 1024.0, -7.5, 0.125});
    Tensor back = nvrd::decode_blob(nvrd::encode_blob(t));
    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) REQUIRE(back[i] == t[i]);
}

TEST_CASE("tensor blob rejects malformed input") {
    Tensor t({3}, {1, 2, 3});
    std::string good = nvrd::encode_blob(t);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    REQUIRE_THROWS_AS(nvrd::decode_blob(bad_magic), nvrd::io_error);

    std::string bad_dtype = good;
    bad_dtype[14] = 1;  // dtype byte for rank-1 shape (3)
    REQUIRE_THROWS_AS(nvrd::decode_blob(bad_dtype), nvrd::io_error);

    std::string truncated = good.substr(0, good.size() - 2);
    REQUIRE_THROWS_AS(nvrd::decode_blob(truncated), nvrd::io_error);
}

TEST_CASE("tensor blob file roundtrip") {
    auto dir = std::filesystem::temp_directory_path() / "nvrd_tensor_test";
    std::filesystem::create_directories(dir);
    Tensor t({4, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    nvrd::write_blob(dir / "t.nvrd", t);
    Tensor back = nvrd::read_blob(dir / "t.nvrd");
    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) REQUIRE(back[i] == t[i]);
    std::filesystem::remove_all(dir);
}

TEST_CASE("crc32 helper matches the standard check value") {
    REQUIRE(nvrd::crc32_of("123456789") == 0xCBF43926u);
}

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4});
    REQUIRE(t.numel() == 24);
    t.at(1, 2, 3) = 5.0;
    REQUIRE(t[23] == 5.0);
    Tensor r = t.reshaped({4, 6});
    REQUIRE(r.at(3, 5) == 5.0);
    REQUIRE_THROWS_AS(t.reshaped({5, 5}), nvrd::shape_error);
    REQUIRE_THROWS_AS(Tensor({2, 2}, {1.0}), nvrd::shape_error);
}
