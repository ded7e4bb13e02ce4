#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hybo::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Triplet {
  std::uint32_t h = 0, r = 0, t = 0;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct Vocabulary {
  std::vector<std::string> names;
  std::unordered_map<std::string, std::uint32_t> ids;

  std::uint32_t intern(const std::string& name);
  std::optional<std::uint32_t> find(const std::string& name) const;
  std::size_t size() const noexcept { return names.size(); }
};

// Entity/relation vocabularies plus triplet splits. Each split holds its
// original triplets followed by their reciprocals (t, r + R, h), so relation
// ids R..2R-1 are the reversed relations.
struct TripletStore {
  Vocabulary entities;
  Vocabulary relations;  // base relations only; reciprocal names are derived
  std::vector<Triplet> train, valid, test;

  std::size_t num_entities() const noexcept { return entities.size(); }
  std::size_t base_relations() const noexcept { return relations.size(); }
  std::size_t num_relations() const noexcept { return 2 * relations.size(); }
  std::string relation_name(std::uint32_t r) const;

  // Known-true set over all splits (filtered evaluation).
  bool known(std::uint32_t h, std::uint32_t r, std::uint32_t t) const;
  std::size_t filter_size() const noexcept { return filter_.size(); }

  // Appends reciprocals to every split and rebuilds the filter. Called once
  // by the loaders and generators.
  void finalize();

 private:
  std::uint64_t key(std::uint32_t h, std::uint32_t r, std::uint32_t t) const;
  std::unordered_set<std::uint64_t> filter_;
};

// Reads train/valid/test files (".txt" or ".tsv") from a directory, or a
// single file used as the train split. Lines are head<TAB>relation<TAB>tail.
// With `fixed`, names must already exist in the given vocabularies.
TripletStore load_triplets(const std::filesystem::path& path);
TripletStore load_triplets(const std::filesystem::path& path, const Vocabulary& fixed_entities,
                           const Vocabulary& fixed_relations);

// Writes the original (non-reciprocal) triplets as train.txt/valid.txt/test.txt.
void write_triplets(const TripletStore& store, const std::filesystem::path& dir);

struct TreeKgInfo {
  std::size_t nodes = 0, edges = 0;
  std::size_t train = 0, valid = 0, test = 0;  // original triplets per split
};

// Balanced b-ary tree of depth d with "parent_of" triplets, split 80/10/10.
// Held-out edges are chosen so that every entity keeps a train triplet.
TripletStore gen_tree_kg(std::size_t branching, std::size_t depth, std::uint64_t seed, TreeKgInfo* info = nullptr);

using Edge = std::pair<std::uint32_t, std::uint32_t>;

struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;  // undirected, u < v, unique

  std::size_t feature_dim = 0;
  std::vector<double> features;  // num_nodes x feature_dim, row-major

  std::size_t num_classes = 0;
  std::vector<std::uint32_t> labels;

  bool has_edge(std::uint32_t u, std::uint32_t v) const;
  std::vector<std::vector<std::uint32_t>> adjacency(const std::vector<Edge>& edge_set) const;
};

// Link prediction split: held-out positives and an equal number of verified
// non-edges for validation and test; message passing uses `train` only.
struct LinkSplit {
  std::vector<Edge> train, valid_pos, valid_neg, test_pos, test_neg;
};
LinkSplit split_edges(const Graph& g, double valid_fraction, double test_fraction, std::uint64_t seed);

struct NodeSplit {
  std::vector<std::uint32_t> train, valid, test;
};
NodeSplit split_nodes(const Graph& g, double valid_fraction, double test_fraction, std::uint64_t seed);

// "u<TAB>v" per line, 0-based ids. With num_nodes, ids must lie below it.
Graph load_edge_list(const std::filesystem::path& path, std::optional<std::size_t> num_nodes = std::nullopt);
void write_edge_list(const Graph& g, const std::filesystem::path& path);

// Directory layout: edges.tsv, optional features.tsv (one row per node) and
// labels.tsv (one label per line).
Graph load_graph_dir(const std::filesystem::path& dir);
void write_graph_dir(const Graph& g, const std::filesystem::path& dir);

enum class GraphKind { tree, barbell };

struct ToyGraphOptions {
  GraphKind kind = GraphKind::tree;
  std::size_t branching = 2;  // tree
  std::size_t depth = 5;      // tree
  std::size_t size = 8;       // barbell clique size
};

// Tree: balanced tree, features = per-level child-index one-hot followed by a
// depth one-hot, labels = which child of the root the node descends from (the
// root itself is class 0). Barbell: two cliques joined by one
// edge, Gaussian features, labels = clique.
Graph gen_toy_graph(const ToyGraphOptions& options, std::uint64_t seed);

}  // namespace hybo::data
