#include "paac/dataset.hpp"
#include "paac/io.hpp"
#include "paac/popularity.hpp"

#include "support/builders.hpp"
#include "support/tempdir.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstring>
#include <map>
#include <set>

using namespace paac;
using paac::testing::TempDir;

TEST_CASE("load_interactions parses delimited rows") {
  TempDir tmp;
  const auto path = tmp.write_file("a.tsv", "u1\ti1\nu1\ti2\n");
  const auto rows = load_interactions(path, InteractionFormat::tsv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == RawInteraction{"u1", "i1"});
  CHECK(rows[1] == RawInteraction{"u1", "i2"});
}

TEST_CASE("load_interactions handles empty files, comments and extra fields") {
  TempDir tmp;
  CHECK(load_interactions(tmp.write_file("e.tsv", "")).empty());
  const auto rows = load_interactions(
      tmp.write_file("c.csv", "# header\nu1,i1,4.5,123\n\nu2,i2\n"), InteractionFormat::csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == RawInteraction{"u1", "i1"});
}

TEST_CASE("load_interactions reports malformed rows with line numbers") {
  TempDir tmp;
  const auto path = tmp.write_file("bad.tsv", "u1\n");
  CHECK_THROWS_MATCHES(load_interactions(path), ParseError,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("line 1")));
  CHECK_THROWS_AS(load_interactions("/nonexistent/file.tsv"), IoError);
}

static std::vector<RawInteraction> complete_bipartite(int users, int items) {
  std::vector<RawInteraction> raw;
  for (int u = 0; u < users; ++u) {
    for (int i = 0; i < items; ++i) {
      raw.push_back({"u" + std::to_string(u), "i" + std::to_string(i)});
    }
  }
  return raw;
}

TEST_CASE("k_core_filter keeps a complete 10x10 graph at k=10") {
  const auto raw = complete_bipartite(10, 10);
  CHECK(k_core_filter(raw, 10) == raw);
}

TEST_CASE("k_core_filter empties a single pair at k=10") {
  CHECK_THROWS_AS(k_core_filter({{"u1", "i1"}}, 10), EmptyResult);
}

TEST_CASE("k_core_filter cascades a star graph to empty at k=2") {
  // One user with 12 leaf items: every item has degree 1 < 2, and removing
  // them drops the user below 2 as well.
  std::vector<RawInteraction> raw;
  for (int i = 0; i < 12; ++i) raw.push_back({"hub", "i" + std::to_string(i)});
  CHECK_THROWS_AS(k_core_filter(raw, 2), EmptyResult);
}

TEST_CASE("k_core_filter deduplicates before counting and is idempotent") {
  auto raw = complete_bipartite(4, 4);
  auto dup = raw;
  dup.insert(dup.end(), raw.begin(), raw.end());
  const auto once = k_core_filter(dup, 3);
  CHECK(once == raw);
  CHECK(k_core_filter(once, 3) == once);
}

TEST_CASE("build_unbiased_split spreads one test interaction per item on a uniform instance") {
  // 10 items x 10 interactions each; budget 10 forces c = 1.
  const auto raw = complete_bipartite(10, 10);
  const auto ds = build_unbiased_split(raw, 0.10, 0.10, 7);
  CHECK(ds.test_quota == 1);
  CHECK(ds.test.size() == 10);
  std::map<int, int> per_item;
  for (const auto& [u, i] : ds.test) ++per_item[i];
  for (const auto& [i, c] : per_item) CHECK(c == 1);
  CHECK(ds.validation.size() == 10);
  CHECK(ds.train.size() == 80);
}

TEST_CASE("build_unbiased_split rejects budgets below one interaction per item") {
  // 10 items with 2 interactions each; 10% budget is 2 < sum min(1, cap) = 10.
  std::vector<RawInteraction> raw;
  for (int i = 0; i < 10; ++i) {
    raw.push_back({"u0", "i" + std::to_string(i)});
    raw.push_back({"u1", "i" + std::to_string(i)});
  }
  CHECK_THROWS_AS(build_unbiased_split(raw, 0.10, 0.10, 1), InfeasibleSplit);
}

TEST_CASE("build_unbiased_split is deterministic per seed") {
  const auto raw = complete_bipartite(12, 9);
  const auto a = build_unbiased_split(raw, 0.10, 0.10, 99);
  const auto b = build_unbiased_split(raw, 0.10, 0.10, 99);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  const auto c = build_unbiased_split(raw, 0.10, 0.10, 100);
  CHECK((a.train != c.train || a.validation != c.validation || a.test != c.test));
}

TEST_CASE("build_unbiased_split partitions the interactions and respects caps") {
  Rng rng(5);
  std::vector<RawInteraction> raw;
  for (int u = 0; u < 30; ++u) {
    for (int t = 0; t < 8; ++t) {
      raw.push_back({"u" + std::to_string(u),
                     "i" + std::to_string(uniform_below(rng, 20))});
    }
  }
  const auto filtered = k_core_filter(raw, 2);
  const auto ds = build_unbiased_split(filtered, 0.15, 0.10, 3);

  std::set<std::pair<int, int>> all;
  for (const auto& s : {ds.train, ds.validation, ds.test}) {
    for (const auto& p : s) CHECK(all.insert(p).second);  // disjoint
  }
  CHECK(all.size() == ds.train.size() + ds.validation.size() + ds.test.size());

  // Every user and item retains a train interaction.
  std::vector<int> ucnt(ds.num_users, 0), icnt(ds.num_items, 0);
  for (const auto& [u, i] : ds.train) {
    ++ucnt[u];
    ++icnt[i];
  }
  CHECK(*std::min_element(ucnt.begin(), ucnt.end()) >= 1);
  CHECK(*std::min_element(icnt.begin(), icnt.end()) >= 1);

  // Test uniformity: every item with cap >= c has exactly c test rows.
  std::vector<int> total(ds.num_items, 0), tst(ds.num_items, 0);
  for (const auto& s : {ds.train, ds.validation, ds.test}) {
    for (const auto& [u, i] : s) ++total[i];
  }
  for (const auto& [u, i] : ds.test) ++tst[i];
  for (int i = 0; i < ds.num_items; ++i) {
    const int cap = total[i] - 1;
    CHECK(tst[i] == std::min(cap, ds.test_quota));
  }
}

TEST_CASE("gini is 0 for equal counts and matches the pairwise formula") {
  CHECK(gini_from_counts({5, 5, 5, 5}) == 0.0);
  CHECK_THAT(gini_from_counts({1, 3}), Catch::Matchers::WithinAbs(0.25, 1e-15));
}

TEST_CASE("gini is scale invariant and inside [0, 1)") {
  Rng rng(11);
  std::vector<std::int64_t> counts;
  for (int i = 0; i < 50; ++i) counts.push_back(1 + static_cast<std::int64_t>(uniform_below(rng, 500)));
  const double g = gini_from_counts(counts);
  CHECK(g >= 0.0);
  CHECK(g < 1.0);
  std::vector<std::int64_t> scaled;
  for (auto c : counts) scaled.push_back(c * 7);
  CHECK_THAT(gini_from_counts(scaled), Catch::Matchers::WithinAbs(g, 1e-12));
}

TEST_CASE("build_popularity_index counts train only and breaks ties by index") {
  const auto ds = paac::testing::make_dataset(
      3, 3, {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 2}}, {{2, 1}}, {{2, 2}});
  const auto pi = build_popularity_index(ds);
  CHECK(pi.counts == std::vector<std::int64_t>{3, 1, 1});
  CHECK(pi.order == std::vector<int>{0, 1, 2});  // tie between items 1 and 2
  CHECK(pi.max_count == 3);
  CHECK(pi.min_count == 1);
  CHECK_THAT(pi.mean_count, Catch::Matchers::WithinAbs(5.0 / 3.0, 1e-15));
  std::int64_t total = 0;
  for (auto c : pi.counts) total += c;
  CHECK(total == static_cast<std::int64_t>(ds.train.size()));
}

TEST_CASE("split manifest round-trips through disk") {
  const auto raw = complete_bipartite(10, 10);
  const auto ds = build_unbiased_split(raw, 0.10, 0.10, 7);
  TempDir tmp;
  save_split_manifest(ds, tmp.str());
  const auto loaded = load_split_manifest(tmp.str());
  CHECK(loaded.num_users == ds.num_users);
  CHECK(loaded.num_items == ds.num_items);
  CHECK(loaded.train == ds.train);
  CHECK(loaded.validation == ds.validation);
  CHECK(loaded.test == ds.test);
  CHECK(loaded.user_keys == ds.user_keys);
  CHECK(loaded.test_quota == ds.test_quota);

  // Re-preparing with the same seed gives byte-identical manifests.
  TempDir tmp2;
  save_split_manifest(build_unbiased_split(raw, 0.10, 0.10, 7), tmp2.str());
  for (const char* name : {"train.txt", "valid.txt", "test.txt", "stats.json"}) {
    CHECK(paac::testing::slurp(tmp.file(name)) == paac::testing::slurp(tmp2.file(name)));
  }
}

TEST_CASE("embedding export writes the header and little-endian float32 rows") {
  PropagatedEmbeddings prop;
  prop.user_final = Mat(2, 3);
  prop.user_final << 1.0, -2.0, 0.5, 4.0, 0.0, -0.25;
  prop.item_final = Mat(1, 3);
  prop.item_final << 8.0, 16.0, -32.0;

  TempDir tmp;
  export_embeddings_binary(prop, tmp.file("e.emb"));
  const std::string bytes = paac::testing::slurp(tmp.file("e.emb"));
  const std::string header = "PAAC-EMB v1 2 1 3\n";
  REQUIRE(bytes.substr(0, header.size()) == header);
  REQUIRE(bytes.size() == header.size() + 9 * sizeof(float));
  float values[9];
  std::memcpy(values, bytes.data() + header.size(), sizeof(values));
  const float want[9] = {1.0f, -2.0f, 0.5f, 4.0f, 0.0f, -0.25f, 8.0f, 16.0f, -32.0f};
  for (int i = 0; i < 9; ++i) CHECK(values[i] == want[i]);

  export_embeddings_text(prop, tmp.file("e.emb.txt"));
  const std::string text = paac::testing::slurp(tmp.file("e.emb.txt"));
  CHECK(text.substr(0, header.size()) == header);
  CHECK(text.find("8 16 -32") != std::string::npos);
}
