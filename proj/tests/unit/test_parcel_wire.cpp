#include <doctest.h>

#include "amt/parcel/action.hpp"
#include "amt/parcel/value.hpp"
#include "amt/parcel/wire.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace amt;

namespace {

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

errc decode_failure(const std::vector<std::uint8_t>& bytes, std::string& what) {
  try {
    (void)decode(bytes);
  } catch (const error& e) {
    what = e.what();
    return e.code();
  }
  return errc{};
}

value random_value(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 2 ? 3 : 4);
  switch (pick(rng)) {
    case 0: return value(static_cast<std::int64_t>(rng()));
    case 1: return value(std::bit_cast<double>(rng()));  // any bit pattern, NaNs included
    case 2: {
      std::string s(rng() % 24, '\0');
      for (auto& c : s) c = static_cast<char>(rng());
      return value(std::move(s));
    }
    case 3: return value();
    default: {
      value_list xs;
      auto n = rng() % 5;
      for (std::size_t i = 0; i < n; ++i) xs.push_back(random_value(rng, depth + 1));
      return value(std::move(xs));
    }
  }
}

gid random_gid(std::mt19937_64& rng) {
  if (rng() % 4 == 0) return null_gid;
  return gid{static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng()), rng()};
}

} // namespace

TEST_CASE("FNV-1a-64 reference values") {
  CHECK(fnv1a_64("") == 0xcbf29ce484222325ULL);
  // Computed with an independent reference implementation.
  CHECK(fnv1a_64("counter/add") == 0x8a70c625616420bfULL);
  static_assert(fnv1a_64("") == 0xcbf29ce484222325ULL);
}

TEST_CASE("minimal parcel is a 64-byte frame starting with AMT1") {
  parcel p;
  auto bytes = encode(p);
  REQUIRE(bytes.size() == 64);
  CHECK(bytes[0] == 0x41);
  CHECK(bytes[1] == 0x4D);
  CHECK(bytes[2] == 0x54);
  CHECK(bytes[3] == 0x31);
  CHECK(decode(bytes) == p);
}

TEST_CASE("frame layout matches a hand-assembled golden frame") {
  parcel p;
  p.dest = gid{1, 2, 3};
  p.continuation = gid{4, 5, 6};
  p.action_id = 0x1122334455667788ULL;
  p.source_locality = 7;
  p.seq_no = 9;
  p.forwarded = true;
  p.payload = encode_value(value(value_list{value(std::int64_t{-1}), value(1.5), value("hi"), value()}));
  // Assembled independently with Python's struct module.
  auto golden = from_hex(
      "414d543100010003000000010000000200000000000000030000000400000005000000000000000611223344"
      "556677880000000700000000000000090000002f040000002a000000040100000008ffffffffffffffff0200"
      "0000083ff8000000000000030000000268690500000000");
  CHECK(encode(p) == golden);
  CHECK(decode(golden) == p);
}

TEST_CASE("decode errors name the offending field") {
  parcel p;
  p.payload = {1, 2, 3};
  auto good = encode(p);
  std::string what;

  auto v2 = good;
  v2[5] = 2;
  CHECK(decode_failure(v2, what) == errc::decode_error);
  CHECK(what.find("unsupported version") != std::string::npos);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(decode_failure(bad_magic, what) == errc::decode_error);
  CHECK(what.find("magic") != std::string::npos);

  auto truncated = good;
  truncated.pop_back();
  CHECK(decode_failure(truncated, what) == errc::decode_error);
  CHECK(what.find("payload") != std::string::npos);

  std::vector<std::uint8_t> short_header(good.begin(), good.begin() + 40);
  CHECK(decode_failure(short_header, what) == errc::decode_error);
  CHECK(what.find("header") != std::string::npos);

  auto bad_flags = good;
  bad_flags[7] = 0x80;
  CHECK(decode_failure(bad_flags, what) == errc::decode_error);
  CHECK(what.find("flags") != std::string::npos);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(decode_failure(trailing, what) == errc::decode_error);
  CHECK(what.find("payload_len") != std::string::npos);
}

TEST_CASE("1000 randomized parcels round-trip bit-exactly") {
  std::mt19937_64 rng(12345);
  for (int i = 0; i < 1000; ++i) {
    parcel p;
    p.dest = random_gid(rng);
    p.continuation = random_gid(rng);
    p.action_id = rng();
    p.source_locality = static_cast<std::uint32_t>(rng());
    p.seq_no = rng();
    p.forwarded = rng() % 2 == 0;
    auto args = random_value(rng, 0);
    p.payload = encode_value(args);
    auto bytes = encode(p);
    CHECK(bytes.size() == frame_header_size + p.payload.size());
    auto back = decode(bytes);
    CHECK(back == p);
    CHECK(encode(back) == bytes);
    CHECK(decode_value(back.payload) == args);
  }
}

TEST_CASE("value encoding is canonical and exact") {
  CHECK(encode_value(value(std::int64_t{1})) ==
        std::vector<std::uint8_t>{1, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 1});
  CHECK(encode_value(value()) == std::vector<std::uint8_t>{5, 0, 0, 0, 0});

  double nan = std::bit_cast<double>(0x7ff8000000000abcULL);
  auto back = decode_value(encode_value(value(nan)));
  CHECK(std::bit_cast<std::uint64_t>(back.as_float64()) == 0x7ff8000000000abcULL);
  CHECK(decode_value(encode_value(value(-0.0))) == value(-0.0));
  CHECK_FALSE(value(-0.0) == value(0.0));

  // Non-canonical or malformed inputs are rejected.
  CHECK_THROWS_AS(decode_value(std::vector<std::uint8_t>{1, 0, 0, 0, 4, 0, 0, 0, 1}), error);
  CHECK_THROWS_AS(decode_value(std::vector<std::uint8_t>{9, 0, 0, 0, 0}), error);
  CHECK_THROWS_AS(decode_value(std::vector<std::uint8_t>{5, 0, 0, 0, 0, 0}), error);
  CHECK_THROWS_AS(decode_value(std::vector<std::uint8_t>{4, 0, 0, 0, 4, 0, 0, 0, 9}), error);

  // Deep nesting is bounded rather than overflowing the stack.
  std::vector<std::uint8_t> deep;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> wrap{4};
    auto len = static_cast<std::uint32_t>(deep.size() + 4);
    for (int s = 24; s >= 0; s -= 8) wrap.push_back(static_cast<std::uint8_t>(len >> s));
    wrap.insert(wrap.end(), {0, 0, 0, static_cast<std::uint8_t>(deep.empty() ? 0 : 1)});
    wrap.insert(wrap.end(), deep.begin(), deep.end());
    deep = std::move(wrap);
  }
  CHECK_THROWS_AS(decode_value(deep), error);
}

TEST_CASE("typed conversions") {
  CHECK(from_value<std::vector<std::int64_t>>(to_value(std::vector<std::int64_t>{1, 2, 3})) ==
        std::vector<std::int64_t>{1, 2, 3});
  gid g{3, 1, 77};
  CHECK(from_value<gid>(to_value(g)) == g);
  CHECK_THROWS_AS(from_value<double>(value(std::int64_t{1})), error);
}

TEST_CASE("signature checking") {
  std::vector<value_tag> sig{value_tag::int64, value_tag::any};
  value_list ok{value(std::int64_t{1}), value("x")};
  CHECK_NOTHROW(check_signature(sig, ok));
  value_list arity{value(std::int64_t{1})};
  CHECK_THROWS_AS(check_signature(sig, arity), error);
  value_list type{value(1.0), value()};
  try {
    check_signature(sig, type);
    FAIL("expected mismatch");
  } catch (const error& e) {
    CHECK(e.code() == errc::signature_mismatch);
  }
}

TEST_CASE("action registry") {
  auto& reg = action_registry::instance();
  auto id = reg.add("test/wire/noop", {value_tag::int64}, action_target::locality,
                    [](action_context&, value_list&) { return value(); });
  CHECK(id == fnv1a_64("test/wire/noop"));
  CHECK(reg.find(id)->name == "test/wire/noop");
  CHECK(reg.id_of("test/wire/noop") == id);
  try {
    reg.add("test/wire/noop", {}, action_target::locality,
            [](action_context&, value_list&) { return value(); });
    FAIL("duplicate accepted");
  } catch (const error& e) {
    CHECK(e.code() == errc::already_exists);
  }
  CHECK(reg.find("test/wire/none") == nullptr);
  CHECK_THROWS_AS(reg.id_of("test/wire/none"), error);
  CHECK_THROWS_AS(reg.add_system(300, "x", {}, action_target::locality, nullptr), error);
}
