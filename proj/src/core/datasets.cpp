#include "hybo/data/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace hybo::data {

namespace fs = std::filesystem;

std::uint32_t Vocabulary::intern(const std::string& name) {
  auto it = ids.find(name);
  if (it != ids.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names.size());
  names.push_back(name);
  ids.emplace(name, id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) return std::nullopt;
  return it->second;
}

std::string TripletStore::relation_name(std::uint32_t r) const {
  const std::size_t R = relations.size();
  if (r < R) return relations.names[r];
  if (r < 2 * R) return relations.names[r - R] + "_reverse";
  throw DataError("relation id " + std::to_string(r) + " out of range");
}

std::uint64_t TripletStore::key(std::uint32_t h, std::uint32_t r, std::uint32_t t) const {
  const std::uint64_t E = entities.size();
  return (static_cast<std::uint64_t>(h) * num_relations() + r) * E + t;
}

bool TripletStore::known(std::uint32_t h, std::uint32_t r, std::uint32_t t) const {
  return filter_.count(key(h, r, t)) != 0;
}

void TripletStore::finalize() {
  const auto R = static_cast<std::uint32_t>(relations.size());
  for (auto* split : {&train, &valid, &test}) {
    const std::size_t n = split->size();
    split->reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const Triplet x = (*split)[i];
      if (x.r >= R) throw DataError("finalize: store already holds reciprocal triplets");
      split->push_back({x.t, x.r + R, x.h});
    }
  }
  filter_.clear();
  for (const auto* split : {&train, &valid, &test})
    for (const auto& x : *split) filter_.insert(key(x.h, x.r, x.t));
}

namespace {

struct RawTriplet {
  std::string h, r, t;
  std::size_t line = 0;
};

std::vector<RawTriplet> read_tsv(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<RawTriplet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    RawTriplet t;
    t.line = lineno;
    std::size_t a = line.find('\t');
    std::size_t b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (a == std::string::npos || b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": expected head<TAB>relation<TAB>tail");
    }
    t.h = line.substr(0, a);
    t.r = line.substr(a + 1, b - a - 1);
    t.t = line.substr(b + 1);
    if (t.h.empty() || t.r.empty() || t.t.empty()) {
      throw DataError(file.string() + ":" + std::to_string(lineno) + ": empty field");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::optional<fs::path> split_file(const fs::path& dir, const std::string& split) {
  for (const char* ext : {".txt", ".tsv"}) {
    fs::path p = dir / (split + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

TripletStore load_impl(const fs::path& path, const Vocabulary* fixed_e, const Vocabulary* fixed_r) {
  std::vector<RawTriplet> splits[3];
  if (fs::is_directory(path)) {
    const char* names[3] = {"train", "valid", "test"};
    for (int s = 0; s < 3; ++s) {
      auto file = split_file(path, names[s]);
      if (!file) throw DataError("missing " + std::string(names[s]) + ".txt in " + path.string());
      splits[s] = read_tsv(*file);
    }
  } else {
    splits[0] = read_tsv(path);
  }

  TripletStore store;
  if (fixed_e != nullptr) {
    store.entities = *fixed_e;
    store.relations = *fixed_r;
  }
  std::vector<Triplet>* dest[3] = {&store.train, &store.valid, &store.test};
  for (int s = 0; s < 3; ++s) {
    for (const auto& raw : splits[s]) {
      Triplet t;
      if (fixed_e != nullptr) {
        auto h = store.entities.find(raw.h), tt = store.entities.find(raw.t);
        auto r = store.relations.find(raw.r);
        if (!h || !tt) {
          throw DataError("line " + std::to_string(raw.line) + ": entity '" + (!h ? raw.h : raw.t) +
                          "' is not in the vocabulary");
        }
        if (!r) throw DataError("line " + std::to_string(raw.line) + ": relation '" + raw.r + "' is not in the vocabulary");
        t = {*h, *r, *tt};
      } else {
        t = {store.entities.intern(raw.h), store.relations.intern(raw.r), store.entities.intern(raw.t)};
      }
      dest[s]->push_back(t);
    }
  }
  if (store.train.empty()) throw DataError("no training triplets in " + path.string());
  store.finalize();
  return store;
}

}  // namespace

TripletStore load_triplets(const fs::path& path) { return load_impl(path, nullptr, nullptr); }

TripletStore load_triplets(const fs::path& path, const Vocabulary& fixed_entities, const Vocabulary& fixed_relations) {
  return load_impl(path, &fixed_entities, &fixed_relations);
}

void write_triplets(const TripletStore& store, const fs::path& dir) {
  fs::create_directories(dir);
  const auto R = static_cast<std::uint32_t>(store.base_relations());
  const std::pair<const char*, const std::vector<Triplet>*> splits[3] = {
      {"train.txt", &store.train}, {"valid.txt", &store.valid}, {"test.txt", &store.test}};
  for (const auto& [name, triplets] : splits) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    for (const auto& t : *triplets) {
      if (t.r >= R) continue;
      out << store.entities.names[t.h] << '\t' << store.relations.names[t.r] << '\t' << store.entities.names[t.t]
          << '\n';
    }
    if (!out) throw DataError("write failed: " + (dir / name).string());
  }
}

namespace {

std::size_t tree_nodes(std::size_t b, std::size_t d) {
  std::size_t total = 0, level = 1;
  for (std::size_t i = 0; i <= d; ++i) {
    total += level;
    if (total > 10'000'000) throw DataError("tree too large");
    level *= b;
  }
  return total;
}

}  // namespace

TripletStore gen_tree_kg(std::size_t branching, std::size_t depth, std::uint64_t seed, TreeKgInfo* info) {
  if (branching < 2) throw DataError("gen_tree_kg: branching must be at least 2");
  if (depth < 2) throw DataError("gen_tree_kg: depth must be at least 2");
  const std::size_t n = tree_nodes(branching, depth);
  const std::size_t num_edges = n - 1;
  if (2 * num_edges < 10) throw DataError("gen_tree_kg: configuration yields fewer than 10 triplets");

  TripletStore store;
  for (std::size_t i = 0; i < n; ++i) store.entities.intern("n" + std::to_string(i));
  const std::uint32_t rel = store.relations.intern("parent_of");

  // Node i > 0 has parent (i - 1) / b in breadth-first numbering.
  std::vector<Triplet> edges;
  std::vector<std::size_t> degree(n, 0);
  for (std::size_t c = 1; c < n; ++c) {
    const std::size_t p = (c - 1) / branching;
    edges.push_back({static_cast<std::uint32_t>(p), rel, static_cast<std::uint32_t>(c)});
    ++degree[p];
    ++degree[c];
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto held = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(edges.size())));
  std::size_t n_valid = 0, n_test = 0;
  std::vector<int> split(edges.size(), 0);
  for (std::size_t i : order) {
    const auto& e = edges[i];
    if (n_valid >= held && n_test >= held) break;
    if (degree[e.h] < 2 || degree[e.t] < 2) continue;
    --degree[e.h];
    --degree[e.t];
    if (n_valid < held) {
      split[i] = 1;
      ++n_valid;
    } else {
      split[i] = 2;
      ++n_test;
    }
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    (split[i] == 0 ? store.train : split[i] == 1 ? store.valid : store.test).push_back(edges[i]);
  }
  if (info != nullptr) *info = {n, num_edges, store.train.size(), store.valid.size(), store.test.size()};
  store.finalize();
  return store;
}

bool Graph::has_edge(std::uint32_t u, std::uint32_t v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges.begin(), edges.end(), Edge{u, v});
}

std::vector<std::vector<std::uint32_t>> Graph::adjacency(const std::vector<Edge>& edge_set) const {
  std::vector<std::vector<std::uint32_t>> adj(num_nodes);
  for (const auto& [u, v] : edge_set) {
    adj.at(u).push_back(v);
    adj.at(v).push_back(u);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

namespace {

void normalize_edges(Graph& g) {
  for (auto& [u, v] : g.edges) {
    if (u > v) std::swap(u, v);
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(), [](const Edge& e) { return e.first == e.second; }),
                g.edges.end());
}

std::vector<Edge> sample_non_edges(const Graph& g, std::size_t count, std::mt19937_64& rng,
                                   std::set<Edge>& taken) {
  const std::size_t n = g.num_nodes;
  const std::size_t capacity = n * (n - 1) / 2 - g.edges.size();
  if (count + taken.size() > capacity) throw DataError("graph too dense to sample non-edges");
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  std::vector<Edge> out;
  while (out.size() < count) {
    std::uint32_t u = pick(rng), v = pick(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (g.has_edge(u, v) || !taken.insert({u, v}).second) continue;
    out.push_back({u, v});
  }
  return out;
}

}  // namespace

LinkSplit split_edges(const Graph& g, double valid_fraction, double test_fraction, std::uint64_t seed) {
  if (valid_fraction < 0 || test_fraction < 0 || valid_fraction + test_fraction >= 1.0) {
    throw DataError("split_edges: invalid fractions");
  }
  std::mt19937_64 rng(seed);
  std::vector<Edge> shuffled = g.edges;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n = shuffled.size();
  const auto n_valid = static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
  LinkSplit s;
  s.valid_pos.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid));
  s.test_pos.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid),
                    shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
  s.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), shuffled.end());
  std::sort(s.train.begin(), s.train.end());
  std::set<Edge> taken;
  s.valid_neg = sample_non_edges(g, n_valid, rng, taken);
  s.test_neg = sample_non_edges(g, n_test, rng, taken);
  return s;
}

NodeSplit split_nodes(const Graph& g, double valid_fraction, double test_fraction, std::uint64_t seed) {
  if (valid_fraction < 0 || test_fraction < 0 || valid_fraction + test_fraction >= 1.0) {
    throw DataError("split_nodes: invalid fractions");
  }
  std::vector<std::uint32_t> ids(g.num_nodes);
  std::iota(ids.begin(), ids.end(), 0u);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = ids.size();
  const auto n_valid = static_cast<std::size_t>(std::lround(valid_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
  NodeSplit s;
  s.valid.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_valid));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_valid),
                ids.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), ids.end());
  return s;
}

namespace {

std::uint32_t parse_id(const std::string& tok, const fs::path& file, std::size_t lineno) {
  std::size_t pos = 0;
  long long v = -1;
  try {
    v = std::stoll(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size() || tok.empty() || v < 0 || v > 0xffffffffLL) {
    throw DataError(file.string() + ":" + std::to_string(lineno) + ": invalid node id '" + tok + "'");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Graph load_edge_list(const fs::path& path, std::optional<std::size_t> num_nodes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Graph g;
  std::string line;
  std::size_t lineno = 0;
  std::uint32_t max_id = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected u<TAB>v");
    const auto u = parse_id(line.substr(0, tab), path, lineno);
    const auto v = parse_id(line.substr(tab + 1), path, lineno);
    if (num_nodes && (u >= *num_nodes || v >= *num_nodes)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": node id out of range for " +
                      std::to_string(*num_nodes) + " nodes");
    }
    max_id = std::max({max_id, u, v});
    any = true;
    g.edges.push_back({u, v});
  }
  g.num_nodes = num_nodes ? *num_nodes : (any ? max_id + 1u : 0u);
  normalize_edges(g);
  return g;
}

void write_edge_list(const Graph& g, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [u, v] : g.edges) out << u << '\t' << v << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

Graph load_graph_dir(const fs::path& dir) {
  std::optional<std::size_t> n;
  std::vector<std::vector<double>> rows;
  if (fs::exists(dir / "features.tsv")) {
    std::ifstream in(dir / "features.tsv");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::vector<double> row;
      double x;
      while (ss >> x) row.push_back(x);
      if (!rows.empty() && row.size() != rows.front().size()) throw DataError("features.tsv: ragged rows");
      rows.push_back(std::move(row));
    }
    n = rows.size();
  }
  std::vector<std::uint32_t> labels;
  if (fs::exists(dir / "labels.tsv")) {
    std::ifstream in(dir / "labels.tsv");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      labels.push_back(parse_id(line, dir / "labels.tsv", lineno));
    }
    if (n && labels.size() != *n) throw DataError("labels.tsv and features.tsv disagree on node count");
    n = labels.size();
  }
  Graph g = load_edge_list(dir / "edges.tsv", n);
  if (!rows.empty()) {
    g.feature_dim = rows.front().size();
    for (const auto& r : rows) g.features.insert(g.features.end(), r.begin(), r.end());
  }
  if (!labels.empty()) {
    g.labels = std::move(labels);
    g.num_classes = *std::max_element(g.labels.begin(), g.labels.end()) + 1u;
  }
  return g;
}

void write_graph_dir(const Graph& g, const fs::path& dir) {
  fs::create_directories(dir);
  write_edge_list(g, dir / "edges.tsv");
  if (g.feature_dim > 0) {
    std::ofstream out(dir / "features.tsv");
    out.precision(17);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
      for (std::size_t j = 0; j < g.feature_dim; ++j) out << (j ? "\t" : "") << g.features[i * g.feature_dim + j];
      out << '\n';
    }
    if (!out) throw DataError("write failed: features.tsv");
  }
  if (!g.labels.empty()) {
    std::ofstream out(dir / "labels.tsv");
    for (auto l : g.labels) out << l << '\n';
    if (!out) throw DataError("write failed: labels.tsv");
  }
}

Graph gen_toy_graph(const ToyGraphOptions& o, std::uint64_t seed) {
  Graph g;
  if (o.kind == GraphKind::tree) {
    if (o.branching < 2 || o.depth < 1) throw DataError("tree graph needs branching >= 2 and depth >= 1");
    const std::size_t n = tree_nodes(o.branching, o.depth);
    g.num_nodes = n;
    g.feature_dim = o.branching * o.depth + o.depth + 1;
    g.features.assign(n * g.feature_dim, 0.0);
    g.labels.assign(n, 0);
    g.num_classes = o.branching;
    std::vector<std::size_t> depth_of(n, 0);
    for (std::size_t c = 1; c < n; ++c) {
      const std::size_t p = (c - 1) / o.branching;
      g.edges.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(c)});
      depth_of[c] = depth_of[p] + 1;
      g.labels[c] = p == 0 ? static_cast<std::uint32_t>(c - 1) : g.labels[p];
      // Inherit the parent's path code and set this level's child slot.
      std::copy_n(g.features.begin() + static_cast<std::ptrdiff_t>(p * g.feature_dim), o.branching * o.depth,
                  g.features.begin() + static_cast<std::ptrdiff_t>(c * g.feature_dim));
      const std::size_t slot = (c - 1) % o.branching;
      g.features[c * g.feature_dim + (depth_of[c] - 1) * o.branching + slot] = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      g.features[i * g.feature_dim + o.branching * o.depth + depth_of[i]] = 1.0;
    }
  } else {
    if (o.size < 3) throw DataError("barbell clique size must be at least 3");
    const std::size_t m = o.size;
    g.num_nodes = 2 * m;
    for (std::size_t side = 0; side < 2; ++side)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
          g.edges.push_back({static_cast<std::uint32_t>(side * m + i), static_cast<std::uint32_t>(side * m + j)});
    g.edges.push_back({static_cast<std::uint32_t>(m - 1), static_cast<std::uint32_t>(m)});
    g.num_classes = 2;
    g.labels.resize(2 * m);
    for (std::size_t i = 0; i < 2 * m; ++i) g.labels[i] = i < m ? 0u : 1u;
    g.feature_dim = 16;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    g.features.resize(g.num_nodes * g.feature_dim);
    for (auto& x : g.features) x = gauss(rng);
  }
  normalize_edges(g);
  return g;
}

}  // namespace hybo::data
