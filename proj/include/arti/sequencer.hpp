#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "arti/geometry.hpp"

namespace arti {

// Shared 128-entry coordinate vocabulary plus framing tokens.
inline constexpr int kCoordBins = 128;
inline constexpr int kTokBos = 128;
inline constexpr int kTokEos = 129;
inline constexpr int kTokPad = 130;
inline constexpr int kVocabSize = 131;

enum class OrderingMode { spatial, hierarchical };

struct TokenSequence {
  std::vector<int> tokens;  // BOS, 6 coordinate tokens per bone, EOS
  OrderingMode ordering = OrderingMode::spatial;
};

struct QuantizedSkeleton {
  std::vector<std::array<int, 3>> joints;  // (x,y,z) bins in [0,127]
  std::vector<std::pair<int, int>> bones;
  std::optional<int> root;
};

struct DetokenizeResult {
  Skeleton skeleton;
  bool dropped_partial_bone = false;  // trailing tokens not forming a full bone
  bool prefix_violation = false;      // hierarchical stream broke parent-first order
  bool dropped_degenerate = false;    // self-loop or duplicate bone in the stream
};

// bin = min(127, floor((c + 0.5) * 128)); c clamped into range by <= 1e-9
int quantize(double coordinate);
// bin-center value (bin + 0.5)/128 - 0.5
double dequantize(int bin);

// Quantize joints and merge exact duplicate triples; bones are remapped,
// self-loops and unordered duplicates dropped. Root follows the merge.
QuantizedSkeleton quantize_skeleton(const Skeleton& skeleton);

// Canonical bone list per the two ordering strategies. Both first sort the
// joints ascending by (z,y,x) and remap bone indices in place.
std::vector<std::pair<int, int>> order_spatial(QuantizedSkeleton& skeleton);
std::vector<std::pair<int, int>> order_hierarchical(QuantizedSkeleton& skeleton);

TokenSequence tokenize(const Skeleton& skeleton, OrderingMode mode);
DetokenizeResult detokenize(const TokenSequence& sequence);

// One sequence per line: integers with literal BOS/EOS markers.
std::string tokens_to_line(const TokenSequence& seq);
TokenSequence tokens_from_line(const std::string& line, OrderingMode mode);

}  // namespace arti
