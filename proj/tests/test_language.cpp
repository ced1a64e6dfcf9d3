#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "emcom/language.hpp"

using namespace emcom;

namespace {

/// Memoised textbook recursion on suffixes, independent of the DP table.
std::size_t edit_oracle(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == x.size()) return y.size() - j;
    if (j == y.size()) return x.size() - i;
    const auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const std::size_t r = std::min({go(i + 1, j) + 1, go(i, j + 1) + 1,
                                    go(i + 1, j + 1) + (x[i] != y[j] ? 1u : 0u)});
    memo[key] = r;
    return r;
  };
  return go(0, 0);
}

/// Plain floating-point Pearson over an explicitly listed pair set.
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

const MeaningSpace kConcat(Representation::concatenation);

/// Hook that makes a speaker emit `lang` with near certainty: the first
/// call sees one row per meaning, the second one row per (meaning, symbol).
LogitHook forcing_hook(const Language& lang, double margin) {
  auto step = std::make_shared<int>(0);
  return [&lang, margin, step](Tensor& logits) {
    const std::size_t rows = logits.rows();
    logits.fill(0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t meaning = *step == 0 ? r : r / kVocabSize;
      logits[r * kVocabSize + lang[meaning].symbols[*step == 0 ? 0 : 1]] = margin;
    }
    *step = (*step + 1) % 2;
  };
}

}  // namespace

TEST_CASE("hamming distance over count coordinates") {
  CHECK(hamming({2, 3}, {2, 3}) == 0);
  CHECK(hamming({2, 3}, {4, 3}) == 1);
  CHECK(hamming({2, 3}, {3, 2}) == 2);
}

TEST_CASE("edit distance examples") {
  CHECK(edit_distance(parse_message("cd"), parse_message("cd")) == 0);
  CHECK(edit_distance(parse_message("cd"), parse_message("ce")) == 1);
  const std::vector<std::size_t> kitten{10, 8, 19, 19, 4, 13}, sitting{18, 8, 19, 19, 8, 13, 6};
  CHECK(edit_distance(kitten, sitting) == 3);
  CHECK(edit_distance(std::vector<std::size_t>{}, sitting) == 7);
}

TEST_CASE("edit distance matches the recursive oracle on every message pair") {
  for (std::size_t i = 0; i < 100; ++i) {
    for (std::size_t j = 0; j < 100; ++j) {
      const Message a = message_from_index(i), b = message_from_index(j);
      const std::size_t d = edit_distance(a, b);
      const std::vector<std::size_t> x(a.symbols.begin(), a.symbols.end());
      const std::vector<std::size_t> y(b.symbols.begin(), b.symbols.end());
      REQUIRE(d == edit_oracle(x, y));
      REQUIRE(d == static_cast<std::size_t>((a.symbols[0] != b.symbols[0]) +
                                            (a.symbols[1] != b.symbols[1])));
    }
  }
}

TEST_CASE("both distances are metrics") {
  const std::vector<Meaning> ms(kConcat.begin(), kConcat.end());
  for (const Meaning& x : ms)
    for (const Meaning& y : ms) {
      CHECK(hamming(x, y) == hamming(y, x));
      CHECK((hamming(x, y) == 0) == (x == y));
      for (const Meaning& z : ms) REQUIRE(hamming(x, z) <= hamming(x, y) + hamming(y, z));
    }
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = 0; j < 100; ++j) {
      const Message a = message_from_index(i), b = message_from_index(j);
      REQUIRE(edit_distance(a, b) == edit_distance(b, a));
      REQUIRE((edit_distance(a, b) == 0) == (a == b));
      for (std::size_t k = 0; k < 100; k += 7) {
        const Message c = message_from_index(k);
        REQUIRE(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
      }
    }
}

TEST_CASE("compositional languages have rho exactly one") {
  CHECK(topological_similarity(compositional_language(kConcat)).rho == 1.0);
  SymbolAssignment assign;
  assign.first = {9, 3, 0, 7, 1, 4};
  assign.second = {2, 8, 5, 6, 9, 0};
  const Language lang = compositional_language(kConcat, assign);
  CHECK(topological_similarity(lang).rho == 1.0);
  CHECK(topological_similarity(lang, Correlation::spearman).rho == 1.0);
  CHECK(topological_similarity(compositional_language(MeaningSpace(Representation::bag))).rho == 1.0);
  CHECK(topological_similarity(lang).n_pairs == 36 * 35 / 2);
}

TEST_CASE("constant languages are flagged as degenerate") {
  const Language constant(kConcat, std::vector<Message>(36, parse_message("aa")));
  const auto r = topological_similarity(constant);
  CHECK(r.degenerate());
  CHECK(topological_similarity(constant, Correlation::spearman).degenerate());
}

TEST_CASE("holistic languages have rho near zero on average") {
  Rng rng(12);
  const Language comp = compositional_language(kConcat);
  double sum = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Language h = holistic_language(comp, rng);
    CHECK(h.injective());
    CHECK(h != comp);
    auto a = h.messages(), b = comp.messages();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    sum += *topological_similarity(h).rho;
  }
  CHECK(std::abs(sum / 100.0) <= 0.1);
}

TEST_CASE("rho matches a floating-point oracle and ignores pair order and symbol names") {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    std::vector<Message> msgs;
    for (std::size_t i = 0; i < 36; ++i) msgs.push_back(message_from_index(rng.index(100)));
    const Language lang(kConcat, msgs);
    const double rho = *topological_similarity(lang).rho;

    // Shuffled enumeration of the pairs.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < 36; ++i)
      for (std::size_t j = i + 1; j < 36; ++j) pairs.emplace_back(j, i);
    rng.shuffle(pairs);
    std::vector<double> dm, dx;
    for (auto [i, j] : pairs) {
      dm.push_back(hamming(kConcat[i], kConcat[j]));
      dx.push_back(static_cast<double>(edit_distance(msgs[i], msgs[j])));
    }
    CHECK(std::abs(rho - pearson(dm, dx)) < 1e-12);

    std::array<std::size_t, kVocabSize> perm{};
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<Message> renamed = msgs;
    for (Message& m : renamed)
      for (std::size_t& s : m.symbols) s = perm[s];
    CHECK(*topological_similarity(Language(kConcat, renamed)).rho == rho);
  }
}

TEST_CASE("spearman rho uses average ranks") {
  Rng rng(8);
  const Language h = holistic_language(compositional_language(kConcat), rng);
  const auto r = topological_similarity(h, Correlation::spearman);
  REQUIRE(r.rho.has_value());
  CHECK(*r.rho > -1.0);
  CHECK(*r.rho < 1.0);
}

TEST_CASE("posterior of highly compositional languages") {
  const Stimuli stimuli{kConcat};
  const Speaker s(Representation::concatenation, AgentHyper{}, 3);
  Rng rng(4);
  SECTION("a near-deterministic compositional speaker") {
    const Language comp = compositional_language(kConcat);
    CHECK(posterior_high_comp(s, stimuli, 200, 0.6, rng, Correlation::pearson, 0,
                              forcing_hook(comp, 40.0)) >= 0.99);
  }
  SECTION("a uniform speaker") {
    const LogitHook flat = [](Tensor& l) { l.fill(0.0); };
    CHECK(posterior_high_comp(s, stimuli, 200, 0.6, rng, Correlation::pearson, 0, flat) <= 0.05);
    CHECK(posterior_high_comp(s, stimuli, 200, -1.1, rng, Correlation::pearson, 0, flat) == 1.0);
  }
  SECTION("a constant speaker is never highly compositional") {
    const Language constant(kConcat, std::vector<Message>(36, parse_message("ba")));
    CHECK(posterior_high_comp(s, stimuli, 50, -1.1, rng, Correlation::pearson, 0,
                              forcing_hook(constant, 60.0)) == 0.0);
  }
  CHECK_THROWS_AS(posterior_high_comp(s, stimuli, 0, 0.6, rng), std::invalid_argument);
}

TEST_CASE("extracted languages are repeatable") {
  const Stimuli stimuli{MeaningSpace(Representation::image)};
  const Speaker s(Representation::image, AgentHyper{}, 9);
  CHECK(extract_language(s, stimuli, 5) == extract_language(s, stimuli, 5));
}

TEST_CASE("language dumps round-trip") {
  Rng rng(3);
  for (Representation kind : {Representation::concatenation, Representation::bag}) {
    const Language lang = holistic_language(compositional_language(MeaningSpace(kind)), rng);
    const auto j = language_to_json(lang);
    CHECK(j.at("alphabet") == "abcdefghij");
    CHECK(j.at("language").size() == lang.size());
    CHECK(language_from_json(j) == lang);
    CHECK(language_from_json(j.at("language")) .size() == lang.size());
  }
  nlohmann::json bad = language_to_json(compositional_language(kConcat));
  bad["language"].erase(bad["language"].begin());
  CHECK_THROWS(language_from_json(bad));
  nlohmann::json dup = language_to_json(compositional_language(kConcat));
  dup["language"].push_back(dup["language"][0]);
  CHECK_THROWS(language_from_json(dup));
}

TEST_CASE("language construction checks") {
  CHECK_THROWS_AS(Language(kConcat, std::vector<Message>(35)), std::invalid_argument);
  SymbolAssignment clash;
  clash.first = {0, 0, 1, 2, 3, 4};
  CHECK_THROWS_AS(compositional_language(kConcat, clash), std::invalid_argument);
  CHECK(compositional_language(kConcat).injective());
  CHECK_FALSE(Language(kConcat, std::vector<Message>(36)).injective());
}
