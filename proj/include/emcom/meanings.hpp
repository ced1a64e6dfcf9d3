#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emcom/rng.hpp"

namespace emcom {

inline constexpr int kMaxCount = 5;
inline constexpr std::size_t kCountValues = kMaxCount + 1;
inline constexpr std::size_t kNumCandidates = 15;
inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr std::size_t kGlyphSide = 5;

enum class Representation { concatenation, image, bag };

inline std::string_view to_string(Representation r) {
  switch (r) {
    case Representation::concatenation: return "concatenation";
    case Representation::image: return "image";
    case Representation::bag: return "bag";
  }
  return "?";
}

inline std::optional<Representation> parse_representation(std::string_view s) {
  if (s == "concatenation") return Representation::concatenation;
  if (s == "image") return Representation::image;
  if (s == "bag") return Representation::bag;
  return std::nullopt;
}

/// Counts of object A and object B, each in 0..5.
struct Meaning {
  int count_a = 0;
  int count_b = 0;

  friend bool operator==(const Meaning&, const Meaning&) = default;
  friend auto operator<=>(const Meaning&, const Meaning&) = default;

  bool valid() const {
    return count_a >= 0 && count_a <= kMaxCount && count_b >= 0 &&
           count_b <= kMaxCount;
  }
  int total() const { return count_a + count_b; }
};

/// "2A3B" style label.
inline std::string to_string(const Meaning& m) {
  return std::to_string(m.count_a) + "A" + std::to_string(m.count_b) + "B";
}

inline Meaning parse_meaning(std::string_view s) {
  if (s.size() != 4 || s[1] != 'A' || s[3] != 'B' || s[0] < '0' ||
      s[0] > '0' + kMaxCount || s[2] < '0' || s[2] > '0' + kMaxCount) {
    throw std::invalid_argument("meaning: cannot parse '" + std::string(s) +
                                "'");
  }
  return Meaning{s[0] - '0', s[2] - '0'};
}

/// The ordered set of meanings a game is played over. Concatenation and
/// image spaces hold all 36 count pairs; the bag space drops the empty bag.
class MeaningSpace {
 public:
  explicit MeaningSpace(Representation kind) : kind_(kind) {
    for (int a = 0; a <= kMaxCount; ++a) {
      for (int b = 0; b <= kMaxCount; ++b) {
        if (kind == Representation::bag && a == 0 && b == 0) continue;
        meanings_.push_back(Meaning{a, b});
      }
    }
  }

  Representation kind() const { return kind_; }
  std::size_t size() const { return meanings_.size(); }
  const std::vector<Meaning>& meanings() const { return meanings_; }
  const Meaning& operator[](std::size_t i) const { return meanings_[i]; }
  auto begin() const { return meanings_.begin(); }
  auto end() const { return meanings_.end(); }

  bool contains(const Meaning& m) const {
    return m.valid() && !(kind_ == Representation::bag && m.total() == 0);
  }

  std::size_t index_of(const Meaning& m) const {
    if (!contains(m)) {
      throw std::out_of_range("meaning " + to_string(m) + " not in " +
                              std::string(to_string(kind_)) + " space");
    }
    const std::size_t flat = static_cast<std::size_t>(m.count_a) * kCountValues +
                             static_cast<std::size_t>(m.count_b);
    return kind_ == Representation::bag ? flat - 1 : flat;
  }

 private:
  Representation kind_;
  std::vector<Meaning> meanings_;
};

inline MeaningSpace enumerate_meanings(Representation kind) {
  return MeaningSpace(kind);
}

// ---------------------------------------------------------------------------
// Encoded inputs

using ConcatVector = std::array<double, 2 * kCountValues>;

struct Image {
  std::array<double, kImagePixels> pixels{};

  double at(std::size_t row, std::size_t col) const {
    return pixels[row * kImageSide + col];
  }
  double& at(std::size_t row, std::size_t col) {
    return pixels[row * kImageSide + col];
  }
};

enum class Token { a, b };

/// One-hot token vectors: A = [0 1], B = [1 0].
inline std::array<double, 2> token_vector(Token t) {
  return t == Token::a ? std::array<double, 2>{0.0, 1.0}
                       : std::array<double, 2>{1.0, 0.0};
}

struct Bag {
  std::vector<Token> tokens;
};

using EncodedInput = std::variant<ConcatVector, Image, Bag>;

inline ConcatVector encode_concatenation(const Meaning& m) {
  if (!m.valid()) {
    throw std::invalid_argument("encode_concatenation: invalid meaning");
  }
  ConcatVector v{};
  v[static_cast<std::size_t>(m.count_a)] = 1.0;
  v[kCountValues + static_cast<std::size_t>(m.count_b)] = 1.0;
  return v;
}

inline Bag encode_bag(const Meaning& m) {
  if (!m.valid()) throw std::invalid_argument("encode_bag: invalid meaning");
  if (m.total() == 0) {
    throw std::invalid_argument("encode_bag: the empty bag is not a bag meaning");
  }
  Bag bag;
  bag.tokens.insert(bag.tokens.end(), static_cast<std::size_t>(m.count_a), Token::a);
  bag.tokens.insert(bag.tokens.end(), static_cast<std::size_t>(m.count_b), Token::b);
  return bag;
}

// ---------------------------------------------------------------------------
// Image rendering
//
// The 32x32 canvas is split into a 4-column x 3-row lattice. Each object
// occupies its own lattice cell; A is a filled 5x5 square, B a hollow one.

inline constexpr std::size_t kLatticeCols = 4;
inline constexpr std::size_t kLatticeRows = 3;
inline constexpr std::size_t kLatticeCells = kLatticeCols * kLatticeRows;

inline std::size_t lattice_col_start(std::size_t c) {
  return c * kImageSide / kLatticeCols;
}
inline std::size_t lattice_row_start(std::size_t r) {
  return r * kImageSide / kLatticeRows;
}

inline void draw_glyph(Image& img, std::size_t top, std::size_t left,
                       Token kind) {
  for (std::size_t i = 0; i < kGlyphSide; ++i) {
    for (std::size_t j = 0; j < kGlyphSide; ++j) {
      const bool border =
          i == 0 || j == 0 || i == kGlyphSide - 1 || j == kGlyphSide - 1;
      if (kind == Token::a || border) img.at(top + i, left + j) = 1.0;
    }
  }
}

/// Draws count_a filled and count_b hollow squares into distinct random
/// lattice cells, each centered with +-1 pixel jitter.
inline Image render_image(const Meaning& m, Rng& rng) {
  if (!m.valid()) throw std::invalid_argument("render_image: invalid meaning");
  std::vector<std::size_t> cells(kLatticeCells);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  const auto objects = static_cast<std::size_t>(m.total());
  for (std::size_t i = 0; i < objects; ++i) {
    std::swap(cells[i], cells[i + rng.index(kLatticeCells - i)]);
  }
  Image img;
  for (std::size_t i = 0; i < objects; ++i) {
    const std::size_t r = cells[i] / kLatticeCols, c = cells[i] % kLatticeCols;
    const std::size_t r0 = lattice_row_start(r), r1 = lattice_row_start(r + 1);
    const std::size_t c0 = lattice_col_start(c), c1 = lattice_col_start(c + 1);
    const std::size_t top = r0 + (r1 - r0 - kGlyphSide) / 2 + rng.index(3) - 1;
    const std::size_t left = c0 + (c1 - c0 - kGlyphSide) / 2 + rng.index(3) - 1;
    draw_glyph(img, top, left,
               i < static_cast<std::size_t>(m.count_a) ? Token::a : Token::b);
  }
  return img;
}

/// Binary PGM (P5, maxval 255).
inline void write_pgm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << kImageSide << ' ' << kImageSide << "\n255\n";
  for (double v : img.pixels) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    out.put(static_cast<char>(static_cast<unsigned char>(c * 255.0 + 0.5)));
  }
}

// ---------------------------------------------------------------------------
// Candidate sets

struct CandidateSet {
  std::vector<Meaning> candidates;
  std::size_t target_index = 0;

  const Meaning& target() const { return candidates[target_index]; }
};

/// Target plus 14 distractors drawn uniformly without replacement from the
/// rest of the space; the target lands at a uniformly random position.
inline CandidateSet make_candidate_set(const Meaning& target,
                                       const MeaningSpace& space, Rng& rng) {
  if (space.size() < kNumCandidates) {
    throw std::invalid_argument("make_candidate_set: space has " +
                                std::to_string(space.size()) +
                                " meanings, need at least 15");
  }
  const std::size_t t = space.index_of(target);
  std::vector<std::size_t> pool;
  pool.reserve(space.size() - 1);
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (i != t) pool.push_back(i);
  }
  CandidateSet set;
  set.candidates.reserve(kNumCandidates);
  for (std::size_t i = 0; i + 1 < kNumCandidates; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    set.candidates.push_back(space[pool[i]]);
  }
  set.target_index = rng.index(kNumCandidates);
  set.candidates.insert(set.candidates.begin() +
                            static_cast<std::ptrdiff_t>(set.target_index),
                        target);
  return set;
}

// ---------------------------------------------------------------------------
// Stimuli

/// Encodes meanings of a space in the space's representation. Concatenation
/// and bag encodings are fixed; images are re-rendered on every request
/// unless `fixed_layout` pins one layout per meaning.
class Stimuli {
 public:
  explicit Stimuli(MeaningSpace space, bool fixed_layout = false,
                   std::uint64_t layout_seed = 0)
      : space_(std::move(space)),
        fixed_layout_(fixed_layout),
        layout_seed_(layout_seed) {
    if (space_.kind() != Representation::image) {
      for (const Meaning& m : space_) cached_.push_back(encode_fixed(m));
    }
  }

  const MeaningSpace& space() const { return space_; }
  bool fixed_layout() const { return fixed_layout_; }

  EncodedInput encode(const Meaning& m, Rng& rng) const {
    if (space_.kind() != Representation::image) {
      return cached_[space_.index_of(m)];
    }
    if (fixed_layout_) {
      Rng layout(derive_seed(layout_seed_, "layout", space_.index_of(m)));
      return render_image(m, layout);
    }
    return render_image(m, rng);
  }

  /// One encoding per meaning, in space order.
  std::vector<EncodedInput> encode_all(Rng& rng) const {
    if (space_.kind() != Representation::image) return cached_;
    std::vector<EncodedInput> out;
    out.reserve(space_.size());
    for (const Meaning& m : space_) out.push_back(encode(m, rng));
    return out;
  }

 private:
  EncodedInput encode_fixed(const Meaning& m) const {
    if (space_.kind() == Representation::bag) return encode_bag(m);
    return encode_concatenation(m);
  }

  MeaningSpace space_;
  bool fixed_layout_;
  std::uint64_t layout_seed_;
  std::vector<EncodedInput> cached_;
};

}  // namespace emcom
