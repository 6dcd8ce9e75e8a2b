#pragma once

// Four-class monochrome glyph dataset: one canonical 5x5 training image per
// class (O, N, L, X) plus, per class, ten distinct test images obtained from
// the training image by inverting exactly two pixels.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qbnn/rng.hpp"

namespace qbnn {

enum class Label : std::uint8_t { O = 0, N = 1, L = 2, X = 3 };

constexpr std::array<Label, 4> kAllLabels{Label::O, Label::N, Label::L,
                                          Label::X};

inline char label_char(Label l) { return "ONLX"[static_cast<int>(l)]; }

/// File/parse failure; carries the 1-based line and column of the offence.
class parse_error : public std::runtime_error {
 public:
  parse_error(int line, int column, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Grid of the wrong size (row length or row count other than 5).
class dimension_error : public parse_error {
 public:
  using parse_error::parse_error;
};

struct Image {
  static constexpr int kSide = 5;
  static constexpr int kPixelCount = kSide * kSide;

  std::array<std::int8_t, kPixelCount> pixels{};  // bipolar: -1 or +1
  Label label = Label::O;

  std::int8_t at(int row, int col) const { return pixels[row * kSide + col]; }
  friend bool operator==(const Image&, const Image&) = default;
};

/// One training data point as consumed by the QUBO builder: bipolar inputs
/// (one per input node) and bipolar target outputs (one per output node).
struct TrainSample {
  std::vector<std::int8_t> inputs;
  std::vector<std::int8_t> outputs;
};

struct Dataset {
  std::vector<Image> train;  // 4 images, one per class, in O,N,L,X order
  std::vector<Image> test;   // 40 images, 10 per class

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Label <-> output-pair bijection. The first two pairs are fixed by the
/// classification convention; the remaining two complete the bijection.
inline std::array<std::int8_t, 2> label_to_outputs(Label l) {
  switch (l) {
    case Label::O: return {-1, -1};
    case Label::N: return {-1, +1};
    case Label::L: return {+1, +1};
    case Label::X: return {+1, -1};
  }
  throw std::invalid_argument("label_to_outputs: invalid label");
}

inline Label outputs_to_label(std::int8_t first, std::int8_t second) {
  if (first < 0) return second < 0 ? Label::O : Label::N;
  return second < 0 ? Label::X : Label::L;
}

inline TrainSample as_sample(const Image& img) {
  TrainSample s;
  s.inputs.assign(img.pixels.begin(), img.pixels.end());
  auto out = label_to_outputs(img.label);
  s.outputs.assign(out.begin(), out.end());
  return s;
}

namespace detail {

// Canonical glyph bitmaps, '#' = +1 and '.' = -1. Kept in-source so the
// training set is fixed and auditable under version control.
inline constexpr std::array<const char*, 4> kGlyphRows = {
    // O
    "#####"
    "#...#"
    "#...#"
    "#...#"
    "#####",
    // N
    "#...#"
    "##..#"
    "#.#.#"
    "#..##"
    "#...#",
    // L
    "#...."
    "#...."
    "#...."
    "#...."
    "#####",
    // X
    "#...#"
    ".#.#."
    "..#.."
    ".#.#."
    "#...#",
};

inline Image glyph(Label l) {
  Image img;
  img.label = l;
  const char* rows = kGlyphRows[static_cast<int>(l)];
  for (int p = 0; p < Image::kPixelCount; ++p)
    img.pixels[p] = rows[p] == '#' ? +1 : -1;
  return img;
}

inline int hamming(const Image& a, const Image& b) {
  int d = 0;
  for (int p = 0; p < Image::kPixelCount; ++p)
    d += a.pixels[p] != b.pixels[p];
  return d;
}

}  // namespace detail

/// Checks the Dataset invariants: 4 training images (one per class), 40 test
/// images (10 per class) each at Hamming distance exactly 2 from its class's
/// training image, all images pairwise distinct.
inline void validate(const Dataset& ds) {
  if (ds.train.size() != 4) throw std::invalid_argument("expected 4 training images");
  if (ds.test.size() != 40) throw std::invalid_argument("expected 40 test images");
  for (int c = 0; c < 4; ++c) {
    if (ds.train[c].label != kAllLabels[c])
      throw std::invalid_argument("training images must cover O,N,L,X in order");
  }
  std::array<int, 4> per_class{};
  for (const Image& t : ds.test) {
    int c = static_cast<int>(t.label);
    ++per_class[c];
    if (detail::hamming(t, ds.train[c]) != 2)
      throw std::invalid_argument("test image must differ from its training image in exactly 2 pixels");
  }
  for (int c = 0; c < 4; ++c)
    if (per_class[c] != 10)
      throw std::invalid_argument("expected 10 test images per class");
  std::vector<const Image*> all;
  for (const Image& i : ds.train) all.push_back(&i);
  for (const Image& i : ds.test) all.push_back(&i);
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b)
      if (all[a]->pixels == all[b]->pixels)
        throw std::invalid_argument("dataset images must be pairwise distinct");
}

/// Generates the canonical dataset: fixed glyphs as training images and, per
/// class, ten distinct 2-pixel inversions drawn deterministically from `seed`.
inline Dataset generate_canonical(std::uint64_t seed) {
  Dataset ds;
  for (Label l : kAllLabels) ds.train.push_back(detail::glyph(l));

  Xoshiro256 rng(derive_seed(seed, 0x6473 /* 'ds' */));
  for (int c = 0; c < 4; ++c) {
    std::vector<std::pair<int, int>> pairs;
    while (pairs.size() < 10) {
      int a = static_cast<int>(rng.below(Image::kPixelCount));
      int b = static_cast<int>(rng.below(Image::kPixelCount));
      if (a == b) continue;
      std::pair<int, int> pr{std::min(a, b), std::max(a, b)};
      bool dup = false;
      for (const auto& q : pairs) dup = dup || q == pr;
      if (dup) continue;
      pairs.push_back(pr);
      Image t = ds.train[c];
      t.pixels[pr.first] = static_cast<std::int8_t>(-t.pixels[pr.first]);
      t.pixels[pr.second] = static_cast<std::int8_t>(-t.pixels[pr.second]);
      ds.test.push_back(t);
    }
  }
  validate(ds);
  return ds;
}

/// Writes a dataset in the plain-text exchange format: per image a header
/// line "label <O|N|L|X>" followed by five rows of five characters from
/// {'.', '#'}. Training images come first, then the test images.
inline void save(const Dataset& ds, std::ostream& out) {
  auto write_image = [&out](const Image& img) {
    out << "label " << label_char(img.label) << '\n';
    for (int r = 0; r < Image::kSide; ++r) {
      for (int c = 0; c < Image::kSide; ++c)
        out << (img.at(r, c) > 0 ? '#' : '.');
      out << '\n';
    }
  };
  for (const Image& i : ds.train) write_image(i);
  for (const Image& i : ds.test) write_image(i);
}

inline void save(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  save(ds, f);
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline Dataset load(std::istream& in) {
  std::vector<Image> images;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("label ", 0) != 0)
      throw parse_error(line_no, 1, "expected 'label <O|N|L|X>'");
    if (line.size() != 7)
      throw parse_error(line_no, 7, "label line must be 'label' plus one character");
    Image img;
    switch (line[6]) {
      case 'O': img.label = Label::O; break;
      case 'N': img.label = Label::N; break;
      case 'L': img.label = Label::L; break;
      case 'X': img.label = Label::X; break;
      default: throw parse_error(line_no, 7, std::string("unknown label token '") + line[6] + "'");
    }
    for (int r = 0; r < Image::kSide; ++r) {
      if (!std::getline(in, line))
        throw dimension_error(line_no + r + 1, 1, "expected 5 pixel rows");
      ++line_no;
      if (line.size() != Image::kSide)
        throw dimension_error(line_no, static_cast<int>(line.size()) + 1,
                              "pixel row must have exactly 5 characters");
      for (int c = 0; c < Image::kSide; ++c) {
        if (line[c] != '#' && line[c] != '.')
          throw parse_error(line_no, c + 1, std::string("invalid pixel character '") + line[c] + "'");
        img.pixels[r * Image::kSide + c] = line[c] == '#' ? +1 : -1;
      }
    }
    images.push_back(img);
  }
  if (images.size() != 44)
    throw dimension_error(line_no + 1, 1, "expected 44 images (4 train + 40 test), got " +
                                              std::to_string(images.size()));
  Dataset ds;
  ds.train.assign(images.begin(), images.begin() + 4);
  ds.test.assign(images.begin() + 4, images.end());
  validate(ds);
  return ds;
}

inline Dataset load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return load(static_cast<std::istream&>(f));
}

}  // namespace qbnn
