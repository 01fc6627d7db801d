#include "nsgmoe/nsg.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace nsgmoe {

long NsgGraph::count(RelationType rel) const {
  long c = 0;
  for (const NsgEdge& e : edges)
    if (e.rel == rel) ++c;
  return c;
}

NsgGraph build_nsg(const MultimodalGraph& g, EdgeVariant variant,
                   const std::vector<SpanningTree>* sparse_trees) {
  const int m = g.num_modalities();
  if (m < 1) throw std::invalid_argument("build_nsg: need at least one modality");
  NsgGraph nsg;
  nsg.n = g.num_nodes;
  nsg.m = m;
  nsg.variant = variant;
  nsg.sparsified = sparse_trees != nullptr;
  nsg.node_type.resize(static_cast<std::size_t>(nsg.num_sub_nodes()));
  nsg.origin.resize(static_cast<std::size_t>(nsg.num_sub_nodes()));
  for (int u = 0; u < nsg.n; ++u)
    for (int t = 0; t < m; ++t) {
      nsg.node_type[static_cast<std::size_t>(nsg.flat(u, t))] = t;
      nsg.origin[static_cast<std::size_t>(nsg.flat(u, t))] = u;
    }

  for (int u = 0; u < nsg.n; ++u)
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        nsg.edges.push_back(
            {nsg.flat(u, i), nsg.flat(u, j), RelationType::IntraNode});

  const bool want_self =
      variant == EdgeVariant::SelfType || variant == EdgeVariant::Hybrid;
  const bool want_cross =
      variant == EdgeVariant::CrossType || variant == EdgeVariant::Hybrid;

  if (want_self) {
    for (const auto& [u, v] : g.edges) {
      const auto [lo, hi] = std::minmax(u, v);
      for (int t = 0; t < m; ++t)
        nsg.edges.push_back(
            {nsg.flat(lo, t), nsg.flat(hi, t), RelationType::InterSelf});
    }
  }

  if (want_cross) {
    if (sparse_trees != nullptr) {
      for (const auto& [a, b] :
           build_sparse_inter_cross(g.edges, *sparse_trees, m))
        nsg.edges.push_back({a, b, RelationType::InterCross});
    } else {
      for (const auto& [u, v] : g.edges) {
        const auto [lo, hi] = std::minmax(u, v);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            nsg.edges.push_back(
                {nsg.flat(lo, i), nsg.flat(hi, j), RelationType::InterCross});
          }
      }
    }
  }

  // Canonical order, independent of the input edge permutation.
  std::sort(nsg.edges.begin(), nsg.edges.end(),
            [](const NsgEdge& a, const NsgEdge& b) {
              return std::tie(a.src, a.dst, a.rel) <
                     std::tie(b.src, b.dst, b.rel);
            });
  return nsg;
}

long expected_edge_count(long n, long m, long e, EdgeVariant variant) {
  const long intra = n * (m * (m - 1) / 2);
  long k = 0;
  switch (variant) {
    case EdgeVariant::SelfType:
      k = m;
      break;
    case EdgeVariant::CrossType:
      k = m * m - m;
      break;
    case EdgeVariant::Hybrid:
      k = m * m;
      break;
  }
  return intra + k * e;
}

std::vector<Mat> slice_features(const MultimodalGraph& g) {
  validate(g);
  return g.features;
}

Mat merge_view(const NsgGraph& nsg, const Mat& sub_embeddings) {
  if (sub_embeddings.rows() != nsg.num_sub_nodes())
    throw std::invalid_argument("merge_view: expected " +
                                std::to_string(nsg.num_sub_nodes()) +
                                " sub-node rows, got " +
                                std::to_string(sub_embeddings.rows()));
  const int d = sub_embeddings.cols();
  Mat out(nsg.n, nsg.m * d);
  for (int u = 0; u < nsg.n; ++u)
    for (int t = 0; t < nsg.m; ++t)
      for (int j = 0; j < d; ++j)
        out(u, t * d + j) = sub_embeddings(nsg.flat(u, t), j);
  return out;
}

Csr relation_adjacency(const NsgGraph& nsg, RelationType rel) {
  const int nm = nsg.num_sub_nodes();
  std::vector<std::vector<int>> nb(static_cast<std::size_t>(nm));
  for (const NsgEdge& e : nsg.edges) {
    if (e.rel != rel) continue;
    nb[static_cast<std::size_t>(e.src)].push_back(e.dst);
    nb[static_cast<std::size_t>(e.dst)].push_back(e.src);
  }
  Csr csr;
  csr.offsets.resize(static_cast<std::size_t>(nm) + 1);
  for (int i = 0; i < nm; ++i) {
    std::sort(nb[static_cast<std::size_t>(i)].begin(),
              nb[static_cast<std::size_t>(i)].end());
    csr.offsets[static_cast<std::size_t>(i) + 1] =
        csr.offsets[static_cast<std::size_t>(i)] +
        static_cast<int>(nb[static_cast<std::size_t>(i)].size());
    csr.indices.insert(csr.indices.end(), nb[static_cast<std::size_t>(i)].begin(),
                       nb[static_cast<std::size_t>(i)].end());
  }
  return csr;
}

std::string relation_name(RelationType rel) {
  switch (rel) {
    case RelationType::IntraNode:
      return "intra";
    case RelationType::InterSelf:
      return "self";
    case RelationType::InterCross:
      return "cross";
  }
  return "?";
}

std::string variant_name(EdgeVariant variant) {
  switch (variant) {
    case EdgeVariant::SelfType:
      return "self";
    case EdgeVariant::CrossType:
      return "cross";
    case EdgeVariant::Hybrid:
      return "hybrid";
  }
  return "?";
}

EdgeVariant parse_variant(const std::string& name) {
  if (name == "self") return EdgeVariant::SelfType;
  if (name == "cross") return EdgeVariant::CrossType;
  if (name == "hybrid") return EdgeVariant::Hybrid;
  throw std::invalid_argument("unknown NSG variant '" + name +
                              "' (expected self, cross or hybrid)");
}

void save_nsg(const NsgGraph& nsg, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path root(dir);
  {
    std::ofstream os(root / "nsg_edges.csv");
    if (!os) throw std::runtime_error("cannot write nsg_edges.csv");
    for (const NsgEdge& e : nsg.edges)
      os << e.src << "," << e.dst << "," << relation_name(e.rel) << "\n";
  }
  ordered_json manifest;
  manifest["n"] = nsg.n;
  manifest["m"] = nsg.m;
  manifest["variant"] = variant_name(nsg.variant);
  manifest["sparsified"] = nsg.sparsified;
  manifest["num_sub_nodes"] = nsg.num_sub_nodes();
  ordered_json counts;
  counts["intra"] = nsg.count(RelationType::IntraNode);
  counts["self"] = nsg.count(RelationType::InterSelf);
  counts["cross"] = nsg.count(RelationType::InterCross);
  manifest["edge_counts"] = counts;
  std::ofstream os(root / "nsg_manifest.json");
  if (!os) throw std::runtime_error("cannot write nsg_manifest.json");
  os << manifest.dump(2) << "\n";
}

}  // namespace nsgmoe
