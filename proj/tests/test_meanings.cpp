#include <catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "emcom/meanings.hpp"

using namespace emcom;

namespace {

struct Component {
  std::size_t pixels = 0;
  std::size_t rows = 0, cols = 0;  // bounding box size
};

/// 4-connected components of non-zero pixels.
std::vector<Component> components(const Image& img) {
  std::vector<int> label(kImagePixels, -1);
  std::vector<Component> out;
  for (std::size_t start = 0; start < kImagePixels; ++start) {
    if (img.pixels[start] == 0.0 || label[start] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::size_t r0 = kImageSide, r1 = 0, c0 = kImageSide, c1 = 0;
    std::vector<std::size_t> stack{start};
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++out[id].pixels;
      const std::size_t r = p / kImageSide, c = p % kImageSide;
      r0 = std::min(r0, r); r1 = std::max(r1, r);
      c0 = std::min(c0, c); c1 = std::max(c1, c);
      const std::size_t nb[4] = {r > 0 ? p - kImageSide : p, r + 1 < kImageSide ? p + kImageSide : p,
                                 c > 0 ? p - 1 : p, c + 1 < kImageSide ? p + 1 : p};
      for (std::size_t q : nb) {
        if (q != p && img.pixels[q] != 0.0 && label[q] < 0) {
          label[q] = id;
          stack.push_back(q);
        }
      }
    }
    out[id].rows = r1 - r0 + 1;
    out[id].cols = c1 - c0 + 1;
  }
  return out;
}

/// Shape classifier: a filled 5x5 glyph has 25 pixels, a hollow one 16.
std::pair<int, int> classify(const Image& img) {
  int a = 0, b = 0;
  for (const Component& c : components(img)) {
    REQUIRE(c.rows == kGlyphSide);
    REQUIRE(c.cols == kGlyphSide);
    if (c.pixels == 25) ++a;
    else if (c.pixels == 16) ++b;
    else FAIL("unexpected glyph with " << c.pixels << " pixels");
  }
  return {a, b};
}

double mass(const Image& img) {
  double s = 0.0;
  for (double v : img.pixels) s += v;
  return s;
}

}  // namespace

TEST_CASE("meaning spaces") {
  const MeaningSpace concat = enumerate_meanings(Representation::concatenation);
  REQUIRE(concat.size() == 36);
  CHECK(concat[0] == Meaning{0, 0});
  CHECK(concat[35] == Meaning{5, 5});
  CHECK(std::is_sorted(concat.begin(), concat.end()));

  const MeaningSpace bag = enumerate_meanings(Representation::bag);
  CHECK(bag.size() == 35);
  CHECK_FALSE(bag.contains(Meaning{0, 0}));
  CHECK(std::set<Meaning>(bag.begin(), bag.end()).size() == 35);

  const MeaningSpace image = enumerate_meanings(Representation::image);
  CHECK(std::equal(image.begin(), image.end(), concat.begin(), concat.end()));
  CHECK_THROWS(concat.index_of(Meaning{6, 0}));
}

TEST_CASE("meaning labels round-trip") {
  for (const Meaning& m : enumerate_meanings(Representation::concatenation)) {
    CHECK(parse_meaning(to_string(m)) == m);
  }
  CHECK(to_string(Meaning{2, 3}) == "2A3B");
  CHECK_THROWS(parse_meaning("7A0B"));
  CHECK_THROWS(parse_meaning("2A"));
}

TEST_CASE("concatenation encoding") {
  using V = ConcatVector;
  CHECK(encode_concatenation({2, 3}) == V{0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0});
  CHECK(encode_concatenation({2, 0}) == V{0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0});
  CHECK(encode_concatenation({0, 0}) == V{1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0});
  std::set<V> seen;
  for (const Meaning& m : enumerate_meanings(Representation::concatenation)) {
    const V v = encode_concatenation(m);
    CHECK(std::accumulate(v.begin(), v.begin() + 6, 0.0) == 1.0);
    CHECK(std::accumulate(v.begin() + 6, v.end(), 0.0) == 1.0);
    seen.insert(v);
  }
  CHECK(seen.size() == 36);
}

TEST_CASE("bag encoding") {
  const auto tokens = [](const Meaning& m) {
    std::vector<std::array<double, 2>> out;
    for (Token t : encode_bag(m).tokens) out.push_back(token_vector(t));
    std::sort(out.begin(), out.end());
    return out;
  };
  using T = std::array<double, 2>;
  CHECK(tokens({2, 3}) == std::vector<T>{{0, 1}, {0, 1}, {1, 0}, {1, 0}, {1, 0}});
  CHECK(tokens({2, 0}) == std::vector<T>{{0, 1}, {0, 1}});
  CHECK(tokens({0, 1}) == std::vector<T>{{1, 0}});
  CHECK_THROWS_AS(encode_bag({0, 0}), std::invalid_argument);

  std::set<std::vector<T>> seen;
  for (const Meaning& m : enumerate_meanings(Representation::bag)) {
    const auto t = tokens(m);
    CHECK(t.size() == static_cast<std::size_t>(m.total()));
    seen.insert(t);
  }
  CHECK(seen.size() == 35);
}

TEST_CASE("rendered images") {
  Rng rng(5);
  SECTION("blank canvas") {
    const Image img = render_image({0, 0}, rng);
    CHECK(mass(img) == 0.0);
  }
  SECTION("glyph mass of three filled squares") {
    CHECK(mass(render_image({3, 0}, rng)) == 75.0);
  }
  SECTION("occupied cells") {
    CHECK(components(render_image({2, 3}, rng)).size() == 5);
  }
  SECTION("shape classifier recovers both counts for every meaning") {
    for (const Meaning& m : enumerate_meanings(Representation::image)) {
      for (int k = 0; k < 20; ++k) {
        const Image img = render_image(m, rng);
        for (double v : img.pixels) CHECK((v == 0.0 || v == 1.0));
        const auto [a, b] = classify(img);
        CHECK(a == m.count_a);
        CHECK(b == m.count_b);
        CHECK(mass(img) == 25.0 * m.count_a + 16.0 * m.count_b);
      }
    }
  }
  SECTION("mass grows with object count at a fixed ratio") {
    for (int ratio_a : {0, 1}) {
      double last = -1.0;
      for (int n = 1; n <= 5; ++n) {
        const Meaning m = ratio_a ? Meaning{n, n} : Meaning{0, n};
        const double v = mass(render_image(m, rng));
        CHECK(v > last);
        last = v;
      }
    }
  }
  SECTION("fresh draws change the layout") {
    std::set<std::vector<double>> layouts;
    for (int k = 0; k < 10; ++k) {
      const Image img = render_image({2, 2}, rng);
      layouts.insert({img.pixels.begin(), img.pixels.end()});
    }
    CHECK(layouts.size() > 1);
  }
}

TEST_CASE("stimuli with fixed layouts repeat their images") {
  const Stimuli fixed(MeaningSpace(Representation::image), true, 7);
  const Stimuli fresh(MeaningSpace(Representation::image), false);
  Rng rng(1);
  const auto a = std::get<Image>(fixed.encode({3, 2}, rng));
  const auto b = std::get<Image>(fixed.encode({3, 2}, rng));
  CHECK(a.pixels == b.pixels);
  int differ = 0;
  for (int k = 0; k < 10; ++k) {
    differ += std::get<Image>(fresh.encode({3, 2}, rng)).pixels !=
              std::get<Image>(fresh.encode({3, 2}, rng)).pixels;
  }
  CHECK(differ > 0);
}

TEST_CASE("candidate sets") {
  const MeaningSpace space = enumerate_meanings(Representation::concatenation);
  Rng rng(17);
  SECTION("structure of every draw") {
    for (int k = 0; k < 2000; ++k) {
      const Meaning& target = space[rng.index(space.size())];
      const CandidateSet cs = make_candidate_set(target, space, rng);
      REQUIRE(cs.candidates.size() == kNumCandidates);
      CHECK(cs.target() == target);
      CHECK(std::count(cs.candidates.begin(), cs.candidates.end(), target) == 1);
      CHECK(std::set<Meaning>(cs.candidates.begin(), cs.candidates.end()).size() == 15);
    }
  }
  SECTION("distractors are uniform over the rest of the space") {
    constexpr int kDraws = 100000;
    const Meaning target{2, 3};
    std::map<Meaning, int> count;
    std::vector<int> position(kNumCandidates, 0);
    for (int k = 0; k < kDraws; ++k) {
      const CandidateSet cs = make_candidate_set(target, space, rng);
      ++position[cs.target_index];
      for (const Meaning& m : cs.candidates) ++count[m];
    }
    for (const Meaning& m : space) {
      if (m == target) continue;
      CHECK(std::abs(count[m] / double(kDraws) - 14.0 / 35.0) < 0.01);
    }
    // Chi-square, 14 degrees of freedom: p > 0.01 below 29.14.
    const double expected = kDraws / 15.0;
    double chi2 = 0.0;
    for (int c : position) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 29.14);
  }
}

TEST_CASE("pgm output") {
  Rng rng(2);
  const Image img = render_image({1, 1}, rng);
  const std::string path = "test_meanings_image.pgm";
  write_pgm(path, img);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  CHECK(magic == "P5");
  CHECK(w == 32);
  CHECK(h == 32);
  CHECK(maxval == 255);
  std::vector<unsigned char> px(kImagePixels);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  CHECK(in.gcount() == static_cast<std::streamsize>(kImagePixels));
  for (std::size_t i = 0; i < kImagePixels; ++i) CHECK(px[i] == (img.pixels[i] > 0 ? 255 : 0));
}
