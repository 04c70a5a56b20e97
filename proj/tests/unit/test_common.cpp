// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "core/common.hpp"
#include "core/csv.hpp"
#include "core/kvconfig.hpp"
#include "support/synthetic.hpp"

using namespace llambert;

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("Rng engine output is the standard mt19937_64 sequence") {
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("Rng::below stays in range and is roughly uniform") {
  Rng rng(1);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) {
    const auto x = rng.below(7);
    REQUIRE(x < 7);
    ++counts[x];
  }
  double chi2 = 0;
  for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  CHECK(chi2 < 22.5);  // p ~ 0.001 at 6 degrees of freedom
  CHECK_THROWS_AS(rng.below(0), Error);
}

TEST_CASE("Rng::uniform lies in [0, 1)") {
  Rng rng(3);
  double lo = 1, hi = 0, sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("shuffle and sample_indices") {
  Rng rng(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  rng.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);

  for (std::size_t k : {0, 1, 10, 50}) {
    Rng r(k);
    const auto idx = sample_indices(50, k, r);
    CHECK(idx.size() == k);
    std::set<std::size_t> uniq(idx.begin(), idx.end());
    CHECK(uniq.size() == k);
    for (auto i : idx) CHECK(i < 50);
  }
  Rng r(1);
  CHECK_THROWS_AS(sample_indices(3, 4, r), Error);
}

TEST_CASE("derive_seed separates seeds and keys") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(0, "") != 0);
}

TEST_CASE("string helpers") {
  CHECK(trim("  a b \n") == "a b");
  CHECK(trim("") == "");
  CHECK(ascii_lower("AbC\xC3\x89") == "abc\xC3\x89");
  // "é" is two bytes; cutting inside it backs off to the previous boundary.
  CHECK(utf8_truncate("ab\xC3\xA9" "cd", 3) == "ab");
  CHECK(utf8_truncate("ab\xC3\xA9" "cd", 4) == "ab\xC3\xA9");
  CHECK(utf8_truncate("abc", 10) == "abc");
}

TEST_CASE("file helpers") {
  testing::TempDir tmp("common");
  const auto p = tmp / "a/b/c.txt";
  write_file(p, "x\r\ny\n\nz");
  CHECK(read_file(p) == "x\r\ny\n\nz");
  CHECK(read_lines(p) == std::vector<std::string>{"x", "y", "", "z"});
  write_file(p, "one\n");
  CHECK(read_lines(p) == std::vector<std::string>{"one"});
  CHECK(file_digest(p) == hex64(fnv1a64("one\n")));
  try {
    read_file(tmp / "missing");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}

TEST_CASE("label names") {
  const LabelNames names{"no", "yes"};
  CHECK(label_from_name(names, "yes") == Label::kPositive);
  CHECK(label_name(names, Label::kNegative) == "no");
  CHECK(opposite(Label::kNegative) == Label::kPositive);
  CHECK_THROWS_AS(label_from_name(names, "maybe"), Error);
}

TEST_CASE("KvConfig parses values, comments and heredocs") {
  const auto cfg = KvConfig::parse(
      "# comment\n"
      "a = 1\n"
      "  b=  two words  \n"
      "\n"
      "text <<END\n"
      "  line one \n"
      "\n"
      "line = three\n"
      "END\n"
      "a = 3\n");
  CHECK(cfg.get("a") == "3");
  CHECK(cfg.get("b") == "two words");
  CHECK(cfg.get("text") == "  line one \n\nline = three");
  CHECK(!cfg.has("c"));
  CHECK(cfg.get_or("c", "d") == "d");
  CHECK(cfg.get_int("a", 0) == 3);
  CHECK(cfg.get_double("missing", 0.5) == 0.5);
  CHECK_THROWS_AS(cfg.get_int("b", 0), Error);
  CHECK_THROWS_AS(KvConfig::parse("no equals sign\n"), Error);
  CHECK_THROWS_AS(KvConfig::parse("x <<EOT\nbody\n"), Error);
  CHECK_THROWS_AS(KvConfig::parse(" = v\n"), Error);
}

TEST_CASE("csv quoting round-trips") {
  const std::vector<std::string> row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  const std::string line = csv::format_row(row);
  CHECK(line == "plain,\"with,comma\",\"with \"\"quote\"\"\",\"multi\nline\",\n");
  const auto parsed = csv::parse(line + "second,row\r\n");
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0] == row);
  CHECK(parsed[1] == std::vector<std::string>{"second", "row"});
  CHECK_THROWS_AS(csv::parse("\"open"), Error);
}
