#include "nsgmoe/graphdata.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace nsgmoe {

namespace {

constexpr char kFeatureMagic[4] = {'N', 'S', 'G', 'F'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& ctx) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error(ctx + ": truncated file");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, float f) {
  static_assert(sizeof(float) == 4, "float must be 32-bit");
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  write_u32(os, v);
}

float read_f32(std::istream& is, const std::string& ctx) {
  const std::uint32_t v = read_u32(is, ctx);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

void check_split_indices(const std::vector<int>& idx, int limit,
                         const char* which) {
  for (int i : idx)
    if (i < 0 || i >= limit)
      throw std::invalid_argument(std::string("splits: ") + which +
                                  " index out of range: " + std::to_string(i));
}

std::string split_kind_name(Splits::Kind k) {
  return k == Splits::Kind::Node ? "node" : "edge";
}

}  // namespace

int MultimodalGraph::feature_width() const {
  int w = 0;
  for (const Modality& m : modalities) w += m.dim;
  return w;
}

void validate(const MultimodalGraph& g) {
  if (g.num_nodes < 0) throw std::invalid_argument("negative node count");
  if (g.features.size() != g.modalities.size())
    throw std::invalid_argument("feature matrix count != modality count");
  for (std::size_t t = 0; t < g.modalities.size(); ++t) {
    const Mat& x = g.features[t];
    if (x.rows() != g.num_nodes || x.cols() != g.modalities[t].dim)
      throw std::invalid_argument("feature matrix '" + g.modalities[t].name +
                                  "' has shape " + shape_string(x) +
                                  ", expected " + std::to_string(g.num_nodes) +
                                  "x" + std::to_string(g.modalities[t].dim));
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& [u, v] : g.edges) {
    if (u < 0 || v < 0 || u >= g.num_nodes || v >= g.num_nodes)
      throw std::invalid_argument("edge endpoint out of range");
    if (u == v)
      throw std::invalid_argument("self-loop at node " + std::to_string(u));
    const auto key = std::minmax(u, v);
    if (!seen.insert(key).second)
      throw std::invalid_argument("duplicate edge (" + std::to_string(key.first) +
                                  "," + std::to_string(key.second) + ")");
  }
  if (!g.labels.empty()) {
    if (static_cast<int>(g.labels.size()) != g.num_nodes)
      throw std::invalid_argument("label count != node count");
    for (int y : g.labels)
      if (y < 0 || y >= g.num_classes)
        throw std::invalid_argument("label " + std::to_string(y) +
                                    " outside [0," +
                                    std::to_string(g.num_classes) + ")");
  }
  if (g.splits) {
    const Splits& s = *g.splits;
    const int limit = s.kind == Splits::Kind::Node ? g.num_nodes
                                                   : g.num_edges();
    check_split_indices(s.train, limit, "train");
    check_split_indices(s.val, limit, "val");
    check_split_indices(s.test, limit, "test");
    std::set<int> all;
    std::size_t total = s.train.size() + s.val.size() + s.test.size();
    all.insert(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    if (all.size() != total)
      throw std::invalid_argument("splits are not pairwise disjoint");
  }
}

void save_dataset(const MultimodalGraph& g, const std::string& dir) {
  validate(g);
  fs::create_directories(dir);
  const fs::path root(dir);

  ordered_json manifest;
  manifest["num_nodes"] = g.num_nodes;
  manifest["modalities"] = ordered_json::array();
  for (const Modality& m : g.modalities)
    manifest["modalities"].push_back({{"name", m.name}, {"dim", m.dim}});
  if (!g.labels.empty()) manifest["num_classes"] = g.num_classes;
  ordered_json files = ordered_json::object();
  for (const Modality& m : g.modalities)
    files[m.name] = "features_" + m.name + ".bin";
  manifest["files"] = files;
  if (g.seed) manifest["seed"] = *g.seed;
  {
    std::ofstream os(root / "manifest.json");
    if (!os) throw std::runtime_error("cannot write manifest.json");
    os << manifest.dump(2) << "\n";
  }

  {
    std::ofstream os(root / "edges.csv");
    if (!os) throw std::runtime_error("cannot write edges.csv");
    for (const auto& [u, v] : g.edges) {
      const auto [lo, hi] = std::minmax(u, v);
      os << lo << "," << hi << "\n";
    }
  }

  for (std::size_t t = 0; t < g.modalities.size(); ++t) {
    const Mat& x = g.features[t];
    std::ofstream os(root / ("features_" + g.modalities[t].name + ".bin"),
                     std::ios::binary);
    if (!os)
      throw std::runtime_error("cannot write features for modality " +
                               g.modalities[t].name);
    os.write(kFeatureMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(x.rows()));
    write_u32(os, static_cast<std::uint32_t>(x.cols()));
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j)
        write_f32(os, static_cast<float>(x(i, j)));
  }

  if (!g.labels.empty()) {
    std::ofstream os(root / "labels.csv");
    if (!os) throw std::runtime_error("cannot write labels.csv");
    for (int y : g.labels) os << y << "\n";
  }

  if (g.splits) {
    ordered_json sj;
    sj["kind"] = split_kind_name(g.splits->kind);
    sj["train"] = g.splits->train;
    sj["val"] = g.splits->val;
    sj["test"] = g.splits->test;
    std::ofstream os(root / "splits.json");
    if (!os) throw std::runtime_error("cannot write splits.json");
    os << sj.dump(2) << "\n";
  }
}

MultimodalGraph load_dataset(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream mf(root / "manifest.json");
  if (!mf) throw std::runtime_error("missing manifest.json in " + dir);
  ordered_json manifest;
  try {
    mf >> manifest;
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest.json: " + std::string(e.what()));
  }

  MultimodalGraph g;
  g.num_nodes = manifest.at("num_nodes").get<int>();
  for (const auto& mj : manifest.at("modalities")) {
    Modality m;
    m.name = mj.at("name").get<std::string>();
    m.dim = mj.at("dim").get<int>();
    g.modalities.push_back(m);
  }
  if (manifest.contains("num_classes"))
    g.num_classes = manifest["num_classes"].get<int>();
  if (manifest.contains("seed"))
    g.seed = manifest["seed"].get<std::uint64_t>();

  {
    std::ifstream es(root / "edges.csv");
    if (!es) throw std::runtime_error("missing edges.csv in " + dir);
    std::string line;
    int lineno = 0;
    std::set<std::pair<int, int>> seen;
    while (std::getline(es, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ls(line);
      long u, v;
      char comma;
      if (!(ls >> u >> comma >> v) || comma != ',')
        throw std::runtime_error("edges.csv: malformed line " +
                                 std::to_string(lineno));
      if (u < 0 || v < 0 || u >= g.num_nodes || v >= g.num_nodes)
        throw std::runtime_error("edges.csv: endpoint out of range at line " +
                                 std::to_string(lineno));
      if (u == v)
        throw std::runtime_error("edges.csv: self-loop at line " +
                                 std::to_string(lineno));
      const std::pair<int, int> key{static_cast<int>(std::min(u, v)),
                                    static_cast<int>(std::max(u, v))};
      if (!seen.insert(key).second)
        throw std::runtime_error("edges.csv: duplicate edge at line " +
                                 std::to_string(lineno));
      g.edges.push_back(key);
    }
  }

  const auto& files = manifest.at("files");
  for (const Modality& m : g.modalities) {
    if (!files.contains(m.name))
      throw std::runtime_error("manifest lists no file for modality " +
                               m.name);
    const std::string fname = files[m.name].get<std::string>();
    std::ifstream is(root / fname, std::ios::binary);
    if (!is) throw std::runtime_error("missing feature file " + fname);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0)
      throw std::runtime_error(fname + ": bad magic bytes");
    const std::uint32_t rows = read_u32(is, fname);
    const std::uint32_t cols = read_u32(is, fname);
    if (rows != static_cast<std::uint32_t>(g.num_nodes))
      throw std::runtime_error(fname + ": header rows " +
                               std::to_string(rows) + " != manifest n " +
                               std::to_string(g.num_nodes));
    if (cols != static_cast<std::uint32_t>(m.dim))
      throw std::runtime_error(fname + ": header cols " +
                               std::to_string(cols) + " != manifest dim " +
                               std::to_string(m.dim));
    Mat x(static_cast<int>(rows), static_cast<int>(cols));
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j)
        x(i, j) = static_cast<double>(read_f32(is, fname));
    g.features.push_back(std::move(x));
  }

  if (fs::exists(root / "labels.csv")) {
    std::ifstream ls(root / "labels.csv");
    std::string line;
    int lineno = 0;
    while (std::getline(ls, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        g.labels.push_back(std::stoi(line));
      } catch (const std::exception&) {
        throw std::runtime_error("labels.csv: malformed line " +
                                 std::to_string(lineno));
      }
    }
  }

  if (fs::exists(root / "splits.json")) {
    std::ifstream ss(root / "splits.json");
    ordered_json sj;
    try {
      ss >> sj;
    } catch (const std::exception& e) {
      throw std::runtime_error("splits.json: " + std::string(e.what()));
    }
    Splits s;
    const std::string kind = sj.at("kind").get<std::string>();
    if (kind == "node")
      s.kind = Splits::Kind::Node;
    else if (kind == "edge")
      s.kind = Splits::Kind::Edge;
    else
      throw std::runtime_error("splits.json: unknown kind '" + kind + "'");
    s.train = sj.at("train").get<std::vector<int>>();
    s.val = sj.at("val").get<std::vector<int>>();
    s.test = sj.at("test").get<std::vector<int>>();
    g.splits = std::move(s);
  }

  try {
    validate(g);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("dataset in " + dir + " invalid: " + e.what());
  }
  return g;
}

MultimodalGraph generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("synthetic: n must be positive");
  if (spec.m < 1) throw std::invalid_argument("synthetic: m must be >= 1");
  if (spec.num_classes < 1 || spec.n < spec.num_classes)
    throw std::invalid_argument("synthetic: need 1 <= C <= n");
  if (static_cast<int>(spec.dims.size()) != spec.m)
    throw std::invalid_argument("synthetic: dims must list one dim per modality");
  for (int d : spec.dims)
    if (d < 1) throw std::invalid_argument("synthetic: dims must be positive");
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(spec.intra_class_edge_prob) ||
      !prob_ok(spec.inter_class_edge_prob))
    throw std::invalid_argument("synthetic: edge probabilities must be in [0,1]");
  if (spec.noise_std < 0.0)
    throw std::invalid_argument("synthetic: noise_std must be >= 0");
  if (spec.mode == SyntheticSpec::Mode::AntiCorrelated) {
    for (int d : spec.dims)
      if (d != spec.dims[0])
        throw std::invalid_argument(
            "synthetic: anti-correlated mode shares class means across "
            "modalities and needs equal dims");
  }

  const int n = spec.n, m = spec.m, C = spec.num_classes;
  MultimodalGraph g;
  g.num_nodes = n;
  g.num_classes = C;
  g.seed = spec.seed;
  g.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g.labels[static_cast<std::size_t>(i)] = i % C;

  const Rng root(spec.seed);
  Rng rng_means = root.split(1);
  Rng rng_edges = root.split(2);
  Rng rng_noise = root.split(3);
  Rng rng_split = root.split(4);

  // Class-mean tables: means[t][c] is the mean vector class c uses in
  // modality t.
  std::vector<std::vector<std::vector<double>>> means(
      static_cast<std::size_t>(m));
  if (spec.mode == SyntheticSpec::Mode::Aligned) {
    for (int t = 0; t < m; ++t) {
      means[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(C));
      for (int c = 0; c < C; ++c) {
        auto& mu = means[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
        mu.resize(static_cast<std::size_t>(spec.dims[static_cast<std::size_t>(t)]));
        for (double& x : mu) x = rng_means.normal();
      }
    }
  } else {
    std::vector<std::vector<double>> pool(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
      pool[static_cast<std::size_t>(c)].resize(
          static_cast<std::size_t>(spec.dims[0]));
      for (double& x : pool[static_cast<std::size_t>(c)]) x = rng_means.normal();
    }
    const int shift = std::max(1, C / 2);
    for (int t = 0; t < m; ++t) {
      means[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(C));
      for (int c = 0; c < C; ++c)
        means[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] =
            pool[static_cast<std::size_t>((c + t * shift) % C)];
    }
  }

  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const double p = g.labels[static_cast<std::size_t>(u)] ==
                               g.labels[static_cast<std::size_t>(v)]
                           ? spec.intra_class_edge_prob
                           : spec.inter_class_edge_prob;
      if (rng_edges.uniform() < p) g.edges.emplace_back(u, v);
    }
  }

  for (int t = 0; t < m; ++t) {
    const int d = spec.dims[static_cast<std::size_t>(t)];
    Mat x(n, d);
    for (int i = 0; i < n; ++i) {
      const auto& mu = means[static_cast<std::size_t>(t)]
                            [static_cast<std::size_t>(g.labels[static_cast<std::size_t>(i)])];
      for (int j = 0; j < d; ++j) {
        const double v = mu[static_cast<std::size_t>(j)] +
                         spec.noise_std * rng_noise.normal();
        // Round through f32 so the on-disk format is lossless for this graph.
        x(i, j) = static_cast<double>(static_cast<float>(v));
      }
    }
    g.modalities.push_back({"mod" + std::to_string(t), d});
    g.features.push_back(std::move(x));
  }

  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng_split.shuffle(perm);
  const int n_train = (n * 6) / 10;
  const int n_val = (n * 2) / 10;
  Splits s;
  s.kind = Splits::Kind::Node;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  g.splits = std::move(s);

  validate(g);
  return g;
}

Mat concat_features(const MultimodalGraph& g) {
  Mat out(g.num_nodes, g.feature_width());
  int col = 0;
  for (const Mat& x : g.features) {
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < x.cols(); ++j) out(i, col + j) = x(i, j);
    col += x.cols();
  }
  return out;
}

std::vector<std::vector<int>> adjacency_lists(
    int num_nodes, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
  for (const auto& [u, v] : edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

}  // namespace nsgmoe
