#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "synkbqa/deptree.hpp"
#include "synkbqa/numcore/init.hpp"
#include "synkbqa/numcore/params.hpp"

namespace synkbqa::fixture {

inline std::string toy_file(const std::string& name) {
  return std::string(SYNKBQA_TOY_DIR) + "/" + name;
}

inline dep::DepTree tree_of(const std::vector<std::tuple<std::string, int, std::string>>& rows) {
  std::vector<dep::Token> tokens;
  int i = 1;
  for (const auto& [form, head, rel] : rows) tokens.push_back({i++, form, head, rel});
  return dep::DepTree::build(std::move(tokens));
}

// what movies did Diana play in ?
inline dep::DepTree question_tree() {
  return tree_of({{"what", 2, "det"},
                  {"movies", 5, "dobj"},
                  {"did", 5, "aux"},
                  {"Diana", 5, "nsubj"},
                  {"play", 0, "root"},
                  {"in", 5, "prep"},
                  {"?", 5, "punct"}});
}

// Random labelled tree: a random root, every other node attached to a node
// placed before it in a random order.
inline dep::DepTree random_tree(std::size_t n, num::Rng& rng) {
  static const char* kLabels[] = {"nsubj", "dobj", "det", "prep", "pobj", "amod", "aux"};
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i) + 1;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<dep::Token> tokens(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int node = order[k];
    int head = 0;
    if (k > 0) head = order[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)];
    tokens[node - 1] = {node, "w" + std::to_string(node), head,
                        head == 0 ? "root" : kLabels[rng() % 7]};
  }
  return dep::DepTree::build(std::move(tokens));
}

inline std::vector<std::vector<int>> adjacency(const dep::DepTree& tree) {
  std::vector<std::vector<int>> adj(tree.size() + 1);
  for (int i = 1; i <= static_cast<int>(tree.size()); ++i) {
    if (tree.head(i) == 0) continue;
    adj[i].push_back(tree.head(i));
    adj[tree.head(i)].push_back(i);
  }
  return adj;
}

// Breadth-first search over the undirected tree; returns the node sequence
// from s to t.
inline std::vector<int> bfs_path(const dep::DepTree& tree, int s, int t) {
  const auto adj = adjacency(tree);
  std::vector<int> prev(tree.size() + 1, -1);
  std::queue<int> q;
  q.push(s);
  prev[s] = s;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (prev[v] < 0) {
        prev[v] = u;
        q.push(v);
      }
    }
  }
  std::vector<int> path{t};
  while (path.back() != s) path.push_back(prev[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

inline int bfs_depth(const dep::DepTree& tree, int i) {
  return static_cast<int>(bfs_path(tree, tree.root(), i).size()) - 1;
}

// Edge groups whose members share every context edge: group g holds trees
// r -c-> a -m_k-> b -d-> c that differ only in the middle edge label.
struct SharedContextCorpus {
  std::vector<dep::DepTree> trees;
  std::vector<std::vector<std::string>> groups;  // lexical keys per group
};

inline SharedContextCorpus shared_context_corpus(int groups, int members, int copies) {
  SharedContextCorpus out;
  for (int g = 0; g < groups; ++g) {
    const std::string s = std::to_string(g);
    std::vector<std::string> keys;
    for (int k = 0; k < members; ++k) {
      const std::string mid = "m" + s + "_" + std::to_string(k);
      keys.push_back("a" + s + "|" + mid + "|b" + s);
      for (int c = 0; c < copies; ++c) {
        out.trees.push_back(tree_of({{"r" + s, 0, "root"},
                                     {"a" + s, 1, "c" + s},
                                     {"b" + s, 2, mid},
                                     {"c" + s, 3, "d" + s}}));
      }
    }
    out.groups.push_back(keys);
  }
  return out;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t entries = 0;
};

// Central differences for every entry of every parameter. `loss` must build
// a fresh tape, and run backward when asked to.
inline GradCheck check_gradients(num::ParamStore& params,
                                 const std::function<double(bool backward)>& loss,
                                 double step = 1e-5) {
  params.zero_grad();
  loss(true);
  GradCheck out;
  for (auto& [name, p] : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = loss(false);
      p[i] = saved - step;
      const double down = loss(false);
      p[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      const double err = std::abs(analytic[i] - numeric) / scale;
      ++out.entries;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace synkbqa::fixture
