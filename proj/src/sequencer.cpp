#include "arti/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "arti/error.hpp"

namespace arti {

int quantize(double coordinate) {
  if (std::isnan(coordinate)) throw_numeric("quantize: NaN coordinate");
  if (coordinate < -0.5) {
    if (coordinate < -0.5 - 1e-9) throw_data("quantize: coordinate below -0.5");
    coordinate = -0.5;
  }
  if (coordinate > 0.5) {
    if (coordinate > 0.5 + 1e-9) throw_data("quantize: coordinate above 0.5");
    coordinate = 0.5;
  }
  int bin = static_cast<int>(std::floor((coordinate + 0.5) * kCoordBins));
  return std::min(bin, kCoordBins - 1);
}

double dequantize(int bin) {
  if (bin < 0 || bin >= kCoordBins) throw_data("dequantize: bin out of range");
  return (bin + 0.5) / kCoordBins - 0.5;
}

QuantizedSkeleton quantize_skeleton(const Skeleton& skeleton) {
  skeleton.validate();
  QuantizedSkeleton q;
  std::map<std::array<int, 3>, int> index_of;
  std::vector<int> remap(skeleton.joints.size());
  for (size_t i = 0; i < skeleton.joints.size(); ++i) {
    const Vec3& p = skeleton.joints[i];
    std::array<int, 3> triple = {quantize(p.x()), quantize(p.y()), quantize(p.z())};
    auto [it, inserted] = index_of.try_emplace(triple, static_cast<int>(q.joints.size()));
    if (inserted) q.joints.push_back(triple);
    remap[i] = it->second;
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : skeleton.bones) {
    int ra = remap[a], rb = remap[b];
    if (ra == rb) continue;  // merged into a self-loop
    if (!seen.insert(std::minmax(ra, rb)).second) continue;
    q.bones.emplace_back(ra, rb);
  }
  if (skeleton.root) q.root = remap[*skeleton.root];
  return q;
}

namespace {

// Sort joints ascending by (z,y,x) and remap bone/root indices.
void sort_joints_zyx(QuantizedSkeleton& s) {
  std::vector<int> order(s.joints.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto &ja = s.joints[a], &jb = s.joints[b];
    return std::tie(ja[2], ja[1], ja[0]) < std::tie(jb[2], jb[1], jb[0]);
  });
  std::vector<int> remap(s.joints.size());
  std::vector<std::array<int, 3>> sorted(s.joints.size());
  for (size_t rank = 0; rank < order.size(); ++rank) {
    remap[order[rank]] = static_cast<int>(rank);
    sorted[rank] = s.joints[order[rank]];
  }
  s.joints = std::move(sorted);
  for (auto& [a, b] : s.bones) {
    a = remap[a];
    b = remap[b];
  }
  if (s.root) s.root = remap[*s.root];
}

}  // namespace

std::vector<std::pair<int, int>> order_spatial(QuantizedSkeleton& skeleton) {
  sort_joints_zyx(skeleton);
  std::vector<std::pair<int, int>> bones = skeleton.bones;
  for (auto& [a, b] : bones)
    if (a > b) std::swap(a, b);
  std::sort(bones.begin(), bones.end());
  skeleton.bones = bones;
  return bones;
}

std::vector<std::pair<int, int>> order_hierarchical(QuantizedSkeleton& skeleton) {
  if (!skeleton.root) throw_data("hierarchical ordering requires a root");
  sort_joints_zyx(skeleton);
  const int j = static_cast<int>(skeleton.joints.size());
  std::vector<std::vector<int>> adj(j);
  for (const auto& [a, b] : skeleton.bones) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  const int root = *skeleton.root;
  if (adj[root].empty()) throw_data("root joint is isolated");

  // BFS layering; an edge into an already-visited joint means a cycle.
  std::vector<int> depth(j, -1), parent_of(j, -1);
  depth[root] = 0;
  std::queue<int> bfs;
  bfs.push(root);
  int visited = 1;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    for (int v : adj[u]) {
      if (v == parent_of[u]) continue;
      if (depth[v] >= 0) throw_data("cyclic bone graph");
      depth[v] = depth[u] + 1;
      parent_of[v] = u;
      ++visited;
      bfs.push(v);
    }
  }
  if (visited != j) throw_data("joints disconnected from root");

  // Bones grouped layer by layer: groups ordered by parent index, bones within
  // a group by child index. Each bone is emitted as (parent, child).
  int max_depth = *std::max_element(depth.begin(), depth.end());
  std::vector<std::pair<int, int>> out;
  out.reserve(skeleton.bones.size());
  for (int layer = 1; layer <= max_depth; ++layer) {
    std::vector<std::pair<int, int>> level;  // (parent, child)
    for (int v = 0; v < j; ++v)
      if (depth[v] == layer) level.emplace_back(parent_of[v], v);
    std::sort(level.begin(), level.end());
    out.insert(out.end(), level.begin(), level.end());
  }
  skeleton.bones = out;
  return out;
}

TokenSequence tokenize(const Skeleton& skeleton, OrderingMode mode) {
  QuantizedSkeleton q = quantize_skeleton(skeleton);
  if (q.bones.empty()) throw_data("skeleton empty after quantization merge");
  std::vector<std::pair<int, int>> bones =
      mode == OrderingMode::spatial ? order_spatial(q) : order_hierarchical(q);

  TokenSequence seq;
  seq.ordering = mode;
  seq.tokens.reserve(6 * bones.size() + 2);
  seq.tokens.push_back(kTokBos);
  for (const auto& [a, b] : bones) {
    for (int idx : {a, b}) {
      const auto& t = q.joints[idx];
      seq.tokens.push_back(t[2]);  // z
      seq.tokens.push_back(t[1]);  // y
      seq.tokens.push_back(t[0]);  // x
    }
  }
  seq.tokens.push_back(kTokEos);
  return seq;
}

DetokenizeResult detokenize(const TokenSequence& sequence) {
  const auto& t = sequence.tokens;
  if (t.size() < 2 || t.front() != kTokBos || t.back() != kTokEos)
    throw_data("detokenize: sequence is not BOS ... EOS framed");
  for (size_t i = 1; i + 1 < t.size(); ++i)
    if (t[i] < 0 || t[i] >= kCoordBins)
      throw_data("detokenize: non-coordinate token inside the frame");

  DetokenizeResult res;
  size_t interior = t.size() - 2;
  size_t nbones = interior / 6;
  if (interior % 6 != 0) res.dropped_partial_bone = true;
  if (nbones == 0) throw_data("detokenize: EOS before any complete bone");

  std::map<std::array<int, 3>, int> index_of;
  auto joint_index = [&](std::array<int, 3> triple) {
    auto [it, inserted] = index_of.try_emplace(triple, static_cast<int>(res.skeleton.joints.size()));
    if (inserted)
      res.skeleton.joints.emplace_back(dequantize(triple[0]), dequantize(triple[1]),
                                       dequantize(triple[2]));
    return it->second;
  };

  const bool hier = sequence.ordering == OrderingMode::hierarchical;
  std::set<int> seen_joints;
  std::set<std::pair<int, int>> seen_bones;
  for (size_t b = 0; b < nbones; ++b) {
    const int* g = &t[1 + 6 * b];
    // tokens per joint are (z,y,x); triples are stored (x,y,z)
    int a = joint_index({g[2], g[1], g[0]});
    int c = joint_index({g[5], g[4], g[3]});
    if (a == c) {
      res.dropped_degenerate = true;
      continue;
    }
    if (!seen_bones.insert(std::minmax(a, c)).second) {
      res.dropped_degenerate = true;
      continue;
    }
    if (hier) {
      if (res.skeleton.bones.empty()) {
        res.skeleton.root = a;
        seen_joints.insert(a);
      }
      int parent = a, child = c;
      if (!seen_joints.count(a)) {
        if (seen_joints.count(c)) {
          // wrong emission direction; re-root the bone at its seen joint
          parent = c;
          child = a;
        }
        res.prefix_violation = true;
      }
      res.skeleton.bones.emplace_back(parent, child);
      res.skeleton.parent[child] = parent;
      seen_joints.insert(parent);
      seen_joints.insert(child);
    } else {
      res.skeleton.bones.emplace_back(a, c);
    }
  }
  if (res.skeleton.bones.empty()) throw_data("detokenize: no valid bone decoded");
  return res;
}

std::string tokens_to_line(const TokenSequence& seq) {
  std::ostringstream os;
  bool first = true;
  for (int tok : seq.tokens) {
    if (!first) os << ' ';
    first = false;
    if (tok == kTokBos)
      os << "BOS";
    else if (tok == kTokEos)
      os << "EOS";
    else if (tok == kTokPad)
      os << "PAD";
    else
      os << tok;
  }
  return os.str();
}

TokenSequence tokens_from_line(const std::string& line, OrderingMode mode) {
  TokenSequence seq;
  seq.ordering = mode;
  std::istringstream is(line);
  std::string word;
  while (is >> word) {
    if (word == "BOS")
      seq.tokens.push_back(kTokBos);
    else if (word == "EOS")
      seq.tokens.push_back(kTokEos);
    else if (word == "PAD")
      seq.tokens.push_back(kTokPad);
    else {
      int v;
      try {
        v = std::stoi(word);
      } catch (const std::exception&) {
        throw_data("token line: unparseable token '" + word + "'");
      }
      if (v < 0 || v >= kVocabSize) throw_data("token line: token id out of range");
      seq.tokens.push_back(v);
    }
  }
  return seq;
}

}  // namespace arti
