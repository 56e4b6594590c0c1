#include "doctest.h"

#include "mmkd/corpus.hpp"
#include "mmkd/errors.hpp"
#include "mmkd/tokenization.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace mmkd;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "mmkd_test_corpus";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

std::size_t words(std::string_view s) { return count_tokens(s, 0); }

std::string sentence(std::size_t n, const std::string& stem = "a") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + stem + std::to_string(i);
  return out;
}

CorpusSet languages(std::initializer_list<std::pair<const char*, std::size_t>> sizes) {
  CorpusSet set;
  for (auto [code, n] : sizes) {
    LanguageId lang(code);
    for (std::size_t i = 0; i < n; ++i) set[lang].push_back({"s" + std::to_string(i), "t" + std::to_string(i), lang});
  }
  return set;
}

}  // namespace

TEST_CASE("language ids") {
  CHECK_THROWS_AS(LanguageId(""), ConfigError);
  CHECK(LanguageId("de") < LanguageId("fr"));
  CHECK(LanguageId("de").code() == "de");
}

TEST_CASE("load_parallel_tsv") {
  const auto good = temp_file("good.tsv", "hello world\thallo welt\nfoo\tbar\r\n");
  const auto pairs = load_parallel_tsv(good, LanguageId("de"));
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].source == "hello world");
  CHECK(pairs[0].target == "hallo welt");
  CHECK(pairs[1].target == "bar");
  CHECK(pairs[1].lang == LanguageId("de"));

  auto message_of = [](const fs::path& p) {
    try {
      load_parallel_tsv(p, LanguageId("de"));
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message_of(temp_file("notab.tsv", "ok\tfine\nmissing tab here\n")).find(":2:") != std::string::npos);
  CHECK(message_of(temp_file("twotabs.tsv", "a\tb\tc\n")).find("more than one tab") != std::string::npos);
  CHECK(message_of(temp_file("empty_side.tsv", "a\t  \n")).find("empty side") != std::string::npos);
  CHECK(message_of(temp_file("utf8.tsv", "caf\xC3\tb\n")).find("UTF-8") != std::string::npos);
  CHECK(message_of(temp_file("overlong.tsv", "\xC0\xAF\tb\n")).find("UTF-8") != std::string::npos);
  CHECK_NOTHROW(load_parallel_tsv(temp_file("unicode.tsv", "caf\xC3\xA9 \xE2\x82\xAC\t\xF0\x9F\x98\x80\n"), LanguageId("fr")));
  CHECK_THROWS_AS(load_parallel_tsv("/nonexistent/file.tsv", LanguageId("de")), DataError);
}

TEST_CASE("save then load round-trips") {
  Corpus pairs = {{"a b", "c d", LanguageId("xx")}, {"e", "f g h", LanguageId("xx")}};
  const auto path = temp_file("roundtrip.tsv", "");
  save_parallel_tsv(path, pairs);
  CHECK(load_parallel_tsv(path, LanguageId("xx")) == pairs);
}

TEST_CASE("length filter keeps pairs with both sides in range") {
  const LanguageId de("de");
  Corpus pairs = {{sentence(9), sentence(12), de},
                  {sentence(10), sentence(128), de},
                  {sentence(12), sentence(129), de},
                  {sentence(20), sentence(20), de}};
  const auto kept = filter_by_length(pairs, words);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == pairs[1]);
  CHECK(kept[1] == pairs[3]);
  CHECK(filter_by_length({{sentence(3), sentence(3), de}}, words).empty());
}

TEST_CASE("prune keeps a seeded subset in original order") {
  Corpus pairs;
  for (int i = 0; i < 100; ++i) pairs.push_back({"s" + std::to_string(i), "t", LanguageId("de")});
  const auto a = prune(pairs, 30, 5);
  const auto b = prune(pairs, 30, 5);
  const auto c = prune(pairs, 30, 6);
  CHECK(a.size() == 30);
  CHECK(a == b);
  CHECK(a != c);
  std::size_t last = 0;
  for (const auto& p : a) {
    const auto idx = std::stoul(p.source.substr(1));
    CHECK(idx >= last);
    last = idx;
  }
  CHECK(prune(pairs, 200, 5) == pairs);
  CHECK(prune(pairs, 0, 5).empty());
}

TEST_CASE("synthetic generator") {
  SyntheticConfig cfg;
  cfg.pair_count = 200;
  const auto a = generate_synthetic_parallel(cfg);
  CHECK(a.size() == 200);
  CHECK(a == generate_synthetic_parallel(cfg));
  const auto perm = synthetic_bijection(cfg);
  std::set<std::size_t> image(perm.begin(), perm.end());
  CHECK(image.size() == cfg.vocab_size);

  // Word-for-word translation through the bijection, same order.
  for (const auto& p : a) {
    CHECK(p.lang == cfg.lang);
    std::istringstream s(p.source), t(p.target);
    std::string ws, wt;
    std::size_t n = 0;
    while (s >> ws) {
      REQUIRE(static_cast<bool>(t >> wt));
      CHECK(wt == "syn1_" + std::to_string(perm[std::stoul(ws.substr(1))]));
      ++n;
    }
    CHECK_FALSE(static_cast<bool>(t >> wt));
    CHECK(n >= cfg.min_len);
    CHECK(n <= cfg.max_len);
  }

  SUBCASE("languages from one source seed share their source side") {
    auto other = cfg;
    other.lang = LanguageId("syn2");
    other.bijection_seed = 99;
    const auto b = generate_synthetic_parallel(other);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].source == b[i].source);
      CHECK(a[i].target != b[i].target);
    }
  }
  SUBCASE("identity bijection and reordering") {
    auto id = cfg;
    id.identity_bijection = true;
    id.pair_count = 5;
    for (const auto& p : generate_synthetic_parallel(id)) CHECK(p.source == p.target);
    id.reorder = Reorder::reverse;
    for (const auto& p : generate_synthetic_parallel(id)) {
      std::istringstream s(p.source), t(p.target);
      std::vector<std::string> sw, tw;
      for (std::string w; s >> w;) sw.push_back(w);
      for (std::string w; t >> w;) tw.push_back(w);
      std::reverse(tw.begin(), tw.end());
      CHECK(sw == tw);
    }
  }
  SUBCASE("mapping a repeated word repeats its image") {
    auto id = cfg;
    id.vocab_size = 2;
    id.pair_count = 3;
    id.coherence = 0;
    const auto p = synthetic_bijection(id);
    for (const auto& pair : generate_synthetic_parallel(id)) {
      std::istringstream s(pair.source), t(pair.target);
      std::string ws, wt;
      while (s >> ws && t >> wt) CHECK(wt == "syn1_" + std::to_string(p[std::stoul(ws.substr(1))]));
    }
  }
  SUBCASE("invalid settings") {
    auto bad = cfg;
    bad.vocab_size = 1;
    CHECK_THROWS_AS(generate_synthetic_parallel(bad), ConfigError);
    bad = cfg;
    bad.min_len = 5;
    CHECK_THROWS_AS(generate_synthetic_parallel(bad), ConfigError);
    CHECK_THROWS_AS(parse_reorder("shuffle"), ConfigError);
    CHECK(parse_reorder("swap_adjacent") == Reorder::swap_adjacent);
  }
}

TEST_CASE("balanced batching, 4 languages x batch 8") {
  const auto set = languages({{"de", 40}, {"fr", 40}, {"ja", 40}, {"zh", 40}});
  const auto plan = plan_balanced_batches(set, 8, 3);
  CHECK(plan.batches.size() == 20);
  for (const auto& batch : plan.batches) {
    REQUIRE(batch.size() == 8);
    std::map<std::size_t, int> per;
    for (const auto& r : batch) ++per[r.language];
    for (std::size_t l = 0; l < 4; ++l) CHECK(per[l] == 2);
  }
  // Equal sizes: every pair appears exactly once.
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& batch : plan.batches) {
    for (const auto& r : batch) CHECK(seen.insert({r.language, r.index}).second);
  }
  CHECK(seen.size() == 160);
  CHECK(plan == plan_balanced_batches(set, 8, 3));
  CHECK_FALSE(plan == plan_balanced_batches(set, 8, 4));
}

TEST_CASE("balanced batching with unequal sizes and remainders") {
  SUBCASE("smaller languages wrap around") {
    const auto set = languages({{"de", 30}, {"fr", 10}});
    const auto plan = plan_balanced_batches(set, 4, 1);
    CHECK(plan.batches.size() == 15);
    std::set<std::size_t> fr_first_pass;
    for (std::size_t b = 0; b < 5; ++b) {
      for (const auto& r : plan.batches[b]) {
        if (r.language == 1) fr_first_pass.insert(r.index);
      }
    }
    CHECK(fr_first_pass.size() == 10);
    for (const auto& batch : plan.batches) CHECK(batch.size() == 4);
  }
  SUBCASE("remainder slots rotate") {
    const auto set = languages({{"a", 30}, {"b", 30}, {"c", 30}});
    const auto plan = plan_balanced_batches(set, 4, 9);
    std::map<std::size_t, int> extra;
    for (std::size_t b = 0; b + 1 < plan.batches.size(); ++b) {
      std::map<std::size_t, int> per;
      for (const auto& r : plan.batches[b]) ++per[r.language];
      CHECK(plan.batches[b].size() == 4);
      for (auto [l, n] : per) {
        CHECK((n == 1 || n == 2));
        if (n == 2) ++extra[l];
      }
    }
    CHECK(extra.size() == 3);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(plan_balanced_batches(languages({{"a", 3}, {"b", 3}, {"c", 3}}), 2, 1), ConfigError);
    CHECK_THROWS_AS(plan_balanced_batches(CorpusSet{}, 2, 1), ConfigError);
    CorpusSet empty;
    empty[LanguageId("a")];
    CHECK_THROWS_AS(plan_balanced_batches(empty, 2, 1), DataError);
  }
}
