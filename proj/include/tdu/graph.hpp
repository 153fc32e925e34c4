#pragma once

// Fixed parameter-space graph on which cascades run.
//
// Nodes are the flattened trainable parameters of a model (node i is the i-th
// scalar in the model's canonical flattening order). The default substrate is
// a Barabasi-Albert graph grown from a complete clique on attach_m + 1 nodes.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tdu/binary_io.hpp"
#include "tdu/error.hpp"
#include "tdu/rng.hpp"

namespace tdu {

/// Immutable CSR adjacency. Neighbor lists are sorted ascending.
struct ParamGraph {
  std::uint64_t n_nodes = 0;
  std::uint64_t attach_m = 0;
  std::uint64_t build_seed = 0;
  std::vector<std::uint64_t> offsets;    // n_nodes + 1
  std::vector<std::uint64_t> neighbors;  // 2 * edge_count

  std::uint64_t degree(std::uint64_t i) const noexcept { return offsets[i + 1] - offsets[i]; }

  std::span<const std::uint64_t> neighbors_of(std::uint64_t i) const noexcept {
    return {neighbors.data() + offsets[i], static_cast<std::size_t>(degree(i))};
  }

  std::uint64_t edge_count() const noexcept { return neighbors.size() / 2; }

  friend bool operator==(const ParamGraph&, const ParamGraph&) = default;
};

namespace detail {

inline ParamGraph csr_from_edges(std::uint64_t n, std::span<const std::pair<std::uint64_t, std::uint64_t>> edges) {
  ParamGraph g;
  g.n_nodes = n;
  std::vector<std::uint64_t> deg(n, 0);
  for (auto [a, b] : edges) {
    ++deg[a];
    ++deg[b];
  }
  g.offsets.assign(n + 1, 0);
  for (std::uint64_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + deg[i];
  g.neighbors.assign(g.offsets[n], 0);
  std::vector<std::uint64_t> fill(g.offsets.begin(), g.offsets.end() - 1);
  for (auto [a, b] : edges) {
    g.neighbors[fill[a]++] = b;
    g.neighbors[fill[b]++] = a;
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    std::sort(g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[i]),
              g.neighbors.begin() + static_cast<std::ptrdiff_t>(g.offsets[i + 1]));
  }
  return g;
}

}  // namespace detail

/// Checks symmetry, absence of self-loops and duplicates, and k_i >= 1.
inline void validate_graph(const ParamGraph& g) {
  if (g.offsets.size() != g.n_nodes + 1 || g.offsets.front() != 0 || g.offsets.back() != g.neighbors.size()) {
    throw Error(ErrorCode::data_integrity, "graph offsets inconsistent with node/neighbor counts");
  }
  for (std::uint64_t i = 0; i < g.n_nodes; ++i) {
    if (g.offsets[i + 1] < g.offsets[i]) throw Error(ErrorCode::data_integrity, "graph offsets not monotone");
    auto nb = g.neighbors_of(i);
    if (nb.empty()) throw Error(ErrorCode::data_integrity, "node " + std::to_string(i) + " has degree 0");
    for (std::size_t k = 0; k < nb.size(); ++k) {
      const auto j = nb[k];
      if (j >= g.n_nodes) throw Error(ErrorCode::data_integrity, "neighbor index out of range");
      if (j == i) throw Error(ErrorCode::data_integrity, "self-loop at node " + std::to_string(i));
      if (k > 0 && nb[k - 1] >= j) throw Error(ErrorCode::data_integrity, "unsorted or duplicate neighbor list");
      auto back = g.neighbors_of(j);
      if (!std::binary_search(back.begin(), back.end(), i)) {
        throw Error(ErrorCode::data_integrity, "asymmetric edge " + std::to_string(i) + "-" + std::to_string(j));
      }
    }
  }
}

/// Builds a graph from an explicit undirected edge list (each edge once).
/// attach_m and build_seed are left at 0.
inline ParamGraph graph_from_edges(std::uint64_t n_nodes, std::span<const std::pair<std::uint64_t, std::uint64_t>> edges) {
  for (auto [a, b] : edges) {
    if (a >= n_nodes || b >= n_nodes) throw Error(ErrorCode::invalid_argument, "edge endpoint out of range");
  }
  ParamGraph g = detail::csr_from_edges(n_nodes, edges);
  validate_graph(g);
  return g;
}

/// Barabasi-Albert growth.
///
/// Nodes 0..m are a complete clique. Each later node t picks attach_m distinct
/// targets by drawing uniformly from an urn that holds every node once per
/// incident edge end (degree-proportional); a repeated target within one step
/// is rejected and redrawn. Draws come from Rng(build_seed).
inline ParamGraph build_ba_graph(std::uint64_t n_nodes, std::uint64_t attach_m, std::uint64_t build_seed) {
  if (attach_m < 1) throw Error(ErrorCode::invalid_size, "attach_m must be >= 1");
  if (n_nodes <= attach_m) {
    throw Error(ErrorCode::invalid_size, "n_nodes (" + std::to_string(n_nodes) + ") must exceed attach_m (" +
                                             std::to_string(attach_m) + ")");
  }
  const std::uint64_t m0 = attach_m + 1;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> edges;
  edges.reserve(m0 * attach_m / 2 + (n_nodes - m0) * attach_m);
  std::vector<std::uint64_t> urn;
  urn.reserve(2 * edges.capacity());
  for (std::uint64_t a = 0; a < m0; ++a) {
    for (std::uint64_t b = a + 1; b < m0; ++b) {
      edges.emplace_back(a, b);
      urn.push_back(a);
      urn.push_back(b);
    }
  }
  Rng rng(build_seed);
  std::vector<std::uint64_t> targets;
  targets.reserve(attach_m);
  for (std::uint64_t t = m0; t < n_nodes; ++t) {
    targets.clear();
    while (targets.size() < attach_m) {
      const std::uint64_t pick = urn[rng.below(urn.size())];
      if (std::find(targets.begin(), targets.end(), pick) == targets.end()) targets.push_back(pick);
    }
    for (auto target : targets) {
      edges.emplace_back(target, t);
      urn.push_back(target);
      urn.push_back(t);
    }
  }
  ParamGraph g = detail::csr_from_edges(n_nodes, edges);
  g.attach_m = attach_m;
  g.build_seed = build_seed;
  return g;
}

/// FNV-1a digest over (n_nodes, attach_m, build_seed) and the edge list in
/// canonical order (i ascending, then j ascending, i < j).
inline std::uint64_t graph_digest(const ParamGraph& g) {
  binary::Fnv1a64 h;
  h.add_u64(g.n_nodes);
  h.add_u64(g.attach_m);
  h.add_u64(g.build_seed);
  for (std::uint64_t i = 0; i < g.n_nodes; ++i) {
    for (auto j : g.neighbors_of(i)) {
      if (j > i) {
        h.add_u64(i);
        h.add_u64(j);
      }
    }
  }
  return h.value();
}

// Cache file: "TDUGRPH", version byte, then little-endian u64 n_nodes,
// attach_m, build_seed, offsets[n_nodes + 1], neighbors[offsets.back()].
inline constexpr char kGraphMagic[7] = {'T', 'D', 'U', 'G', 'R', 'P', 'H'};
inline constexpr std::uint8_t kGraphVersion = 1;

inline void write_graph(std::ostream& out, const ParamGraph& g) {
  out.write(kGraphMagic, sizeof(kGraphMagic));
  out.put(static_cast<char>(kGraphVersion));
  binary::put_le<std::uint64_t>(out, g.n_nodes);
  binary::put_le<std::uint64_t>(out, g.attach_m);
  binary::put_le<std::uint64_t>(out, g.build_seed);
  for (auto v : g.offsets) binary::put_le<std::uint64_t>(out, v);
  for (auto v : g.neighbors) binary::put_le<std::uint64_t>(out, v);
  if (!out) throw Error(ErrorCode::io, "failed writing graph cache");
}

inline ParamGraph read_graph(std::istream& in) {
  char magic[sizeof(kGraphMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kGraphMagic))) {
    throw Error(ErrorCode::bad_magic, "not a graph cache file");
  }
  const int version = in.get();
  if (version != kGraphVersion) throw Error(ErrorCode::bad_version, "unsupported graph cache version " + std::to_string(version));
  ParamGraph g;
  g.n_nodes = binary::get_le<std::uint64_t>(in, "n_nodes");
  g.attach_m = binary::get_le<std::uint64_t>(in, "attach_m");
  g.build_seed = binary::get_le<std::uint64_t>(in, "build_seed");
  if (g.n_nodes > (std::uint64_t{1} << 40)) throw Error(ErrorCode::data_integrity, "implausible node count");
  g.offsets.resize(g.n_nodes + 1);
  for (auto& v : g.offsets) v = binary::get_le<std::uint64_t>(in, "offsets");
  if (g.offsets.back() > (std::uint64_t{1} << 42)) throw Error(ErrorCode::data_integrity, "implausible edge count");
  g.neighbors.resize(g.offsets.back());
  for (auto& v : g.neighbors) v = binary::get_le<std::uint64_t>(in, "neighbors");
  validate_graph(g);
  return g;
}

inline void save_graph(const std::filesystem::path& path, const ParamGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string());
  write_graph(out, g);
}

inline ParamGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return read_graph(in);
}

}  // namespace tdu
