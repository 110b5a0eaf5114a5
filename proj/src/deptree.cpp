#include "synkbqa/deptree.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace synkbqa::dep {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_wh_word(std::string_view lowered) {
  static constexpr std::array<std::string_view, 9> kWh = {
      "what", "who", "whom", "whose", "which", "where", "when", "why", "how"};
  return std::find(kWh.begin(), kWh.end(), lowered) != kWh.end();
}

bool is_punctuation(std::string_view form) {
  if (form.empty()) return false;
  return std::all_of(form.begin(), form.end(), [](unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
  });
}

std::size_t DepTree::slot(int i) const {
  if (!valid_index(i)) {
    throw Error("token index " + std::to_string(i) + " out of range 1.." +
                std::to_string(tokens_.size()));
  }
  return static_cast<std::size_t>(i - 1);
}

DepTree DepTree::build(std::vector<Token> tokens) {
  const int n = static_cast<int>(tokens.size());
  if (n == 0) throw TreeError("empty sentence", 0);
  DepTree t;
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Token& tok = tokens[static_cast<std::size_t>(i)];
    if (tok.index != i + 1) {
      throw TreeError("token ids must be consecutive from 1, found " + std::to_string(tok.index),
                      tok.index);
    }
    if (tok.head < 0 || tok.head > n) {
      throw TreeError("head " + std::to_string(tok.head) + " out of range", tok.index);
    }
    if (tok.head == tok.index) throw TreeError("cycle: token is its own head", tok.index);
    if (tok.deprel.empty()) throw TreeError("empty dependency label", tok.index);
    if (tok.head == 0) {
      ++roots;
      if (roots > 1) throw TreeError("multiple roots", tok.index);
      t.root_ = tok.index;
    }
  }
  if (roots == 0) throw TreeError("no root token", 0);

  t.depth_.assign(static_cast<std::size_t>(n), -1);
  t.depth_[static_cast<std::size_t>(t.root_ - 1)] = 0;
  for (int i = 1; i <= n; ++i) {
    // Walk up until a node of known depth; more than n steps means a cycle.
    std::vector<int> chain;
    int cur = i;
    while (t.depth_[static_cast<std::size_t>(cur - 1)] < 0) {
      chain.push_back(cur);
      if (static_cast<int>(chain.size()) > n) throw TreeError("cycle in head links", i);
      cur = tokens[static_cast<std::size_t>(cur - 1)].head;
    }
    int d = t.depth_[static_cast<std::size_t>(cur - 1)];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      t.depth_[static_cast<std::size_t>(*it - 1)] = ++d;
    }
  }

  t.left_.assign(static_cast<std::size_t>(n), {});
  t.right_.assign(static_cast<std::size_t>(n), {});
  for (const Token& tok : tokens) {
    if (tok.head == 0) continue;
    auto& side = tok.index < tok.head ? t.left_ : t.right_;
    side[static_cast<std::size_t>(tok.head - 1)].push_back(tok.index);
  }

  // Breadth-first from the root, then reversed: children before heads.
  std::vector<int> order{t.root_};
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto s = static_cast<std::size_t>(order[k] - 1);
    order.insert(order.end(), t.left_[s].begin(), t.left_[s].end());
    order.insert(order.end(), t.right_[s].begin(), t.right_[s].end());
  }
  t.bottom_up_.assign(order.rbegin(), order.rend());
  t.tokens_ = std::move(tokens);
  return t;
}

std::vector<int> DepTree::children(int i) const {
  std::vector<int> out(left_[slot(i)].begin(), left_[slot(i)].end());
  out.insert(out.end(), right_[slot(i)].begin(), right_[slot(i)].end());
  return out;
}

int DepTree::depth(int i) const { return depth_[slot(i)]; }

int DepTree::lowest_common_ancestor(int a, int b) const {
  slot(a);
  slot(b);
  while (depth(a) > depth(b)) a = head(a);
  while (depth(b) > depth(a)) b = head(b);
  while (a != b) {
    a = head(a);
    b = head(b);
  }
  return a;
}

std::vector<std::string> DepTree::forms() const {
  std::vector<std::string> out;
  out.reserve(tokens_.size());
  for (const Token& t : tokens_) out.push_back(t.form);
  return out;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool parse_int(std::string_view s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view comment_value(std::string_view line, std::string_view key) {
  // "# key = value"
  std::string_view rest = line.substr(1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.substr(0, key.size()) != key) return {};
  rest.remove_prefix(key.size());
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.empty() || rest.front() != '=') return {};
  rest.remove_prefix(1);
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  return rest;
}

struct PendingSentence {
  std::string id;
  std::string text;
  std::size_t first_line = 0;
  std::vector<Token> tokens;
  std::vector<std::size_t> lines;
  std::string error;
  std::size_t error_line = 0;
  bool active = false;
};

}  // namespace

ConlluResult parse_conllu(std::string_view text) {
  ConlluResult result;
  PendingSentence cur;
  std::size_t ordinal = 0;

  auto flush = [&] {
    if (!cur.active) return;
    ++ordinal;
    if (cur.error.empty() && cur.tokens.empty()) cur.error = "sentence has no tokens";
    if (cur.error.empty()) {
      try {
        ConlluSentence s;
        s.id = cur.id.empty() ? std::to_string(ordinal) : cur.id;
        if (cur.text.empty()) {
          for (const Token& t : cur.tokens) {
            if (!s.text.empty()) s.text += ' ';
            s.text += t.form;
          }
        } else {
          s.text = cur.text;
        }
        s.first_line = cur.first_line;
        s.tree = DepTree::build(std::move(cur.tokens));
        result.sentences.push_back(std::move(s));
      } catch (const TreeError& e) {
        const std::size_t line =
            e.token() > 0 && static_cast<std::size_t>(e.token()) <= cur.lines.size()
                ? cur.lines[static_cast<std::size_t>(e.token() - 1)]
                : cur.first_line;
        result.errors.push_back({line, ordinal, e.what()});
      }
    } else {
      result.errors.push_back({cur.error_line, ordinal, cur.error});
    }
    cur = PendingSentence{};
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
      if (nl == text.size()) break;
      continue;
    }
    if (!cur.active) {
      cur.active = true;
      cur.first_line = line_no;
    }
    if (line.front() == '#') {
      if (auto v = comment_value(line, "sent_id"); !v.empty()) cur.id = std::string(v);
      if (auto v = comment_value(line, "text"); !v.empty()) cur.text = std::string(v);
      continue;
    }
    if (!cur.error.empty()) continue;

    const auto cols = split_tabs(line);
    if (cols.size() != 10) {
      cur.error = "expected 10 tab-separated columns, found " + std::to_string(cols.size());
      cur.error_line = line_no;
      continue;
    }
    if (cols[0].find_first_of("-.") != std::string_view::npos) continue;
    Token tok;
    if (!parse_int(cols[0], tok.index)) {
      cur.error = "non-integer ID '" + std::string(cols[0]) + "'";
      cur.error_line = line_no;
      continue;
    }
    if (!parse_int(cols[6], tok.head)) {
      cur.error = "non-integer HEAD '" + std::string(cols[6]) + "'";
      cur.error_line = line_no;
      continue;
    }
    tok.form = std::string(cols[1]);
    tok.deprel = std::string(cols[7]);
    cur.tokens.push_back(std::move(tok));
    cur.lines.push_back(line_no);
    if (nl == text.size()) break;
  }
  flush();
  return result;
}

ConlluResult read_conllu_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open CoNLL-U file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_conllu(buf.str());
}

SdpPath sdp(const DepTree& tree, int source, int target) {
  if (!tree.valid_index(source) || !tree.valid_index(target)) {
    throw Error("sdp: index out of range (" + std::to_string(source) + ", " +
                std::to_string(target) + ") for a tree of " + std::to_string(tree.size()) +
                " tokens");
  }
  const int lca = tree.lowest_common_ancestor(source, target);
  SdpPath path;
  for (int cur = source; cur != lca; cur = tree.head(cur)) {
    path.nodes.push_back(cur);
    path.edges.push_back({tree.token(cur).deprel, Step::kUp});
  }
  path.nodes.push_back(lca);
  std::vector<int> down;
  for (int cur = target; cur != lca; cur = tree.head(cur)) down.push_back(cur);
  for (auto it = down.rbegin(); it != down.rend(); ++it) {
    path.edges.push_back({tree.token(*it).deprel, Step::kDown});
    path.nodes.push_back(*it);
  }
  return path;
}

std::string render_path(const DepTree& tree, const SdpPath& path) {
  std::string out;
  for (std::size_t i = 0; i < path.nodes.size(); ++i) {
    if (i > 0) out += " -" + path.edges[i - 1].label + "-> ";
    out += tree.form(path.nodes[i]);
  }
  return out;
}

std::vector<std::string> path_tokens(const SdpPath& path, std::span<const std::string> words) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < path.nodes.size(); ++i) {
    if (i > 0) out.push_back(path.edges[i - 1].label);
    const auto idx = static_cast<std::size_t>(path.nodes[i] - 1);
    if (idx >= words.size()) throw Error("path_tokens: word list shorter than the tree");
    out.push_back(words[idx]);
  }
  return out;
}

DirectedEdge incoming_edge(const DepTree& tree, int tail) {
  const Token& t = tree.token(tail);
  if (t.head == 0) throw Error("token " + std::to_string(tail) + " is the root");
  return {t.head, tail, tree.form(t.head), t.deprel, t.form};
}

std::vector<DirectedEdge> edges(const DepTree& tree) {
  std::vector<DirectedEdge> out;
  for (const Token& t : tree.tokens()) {
    if (t.head != 0) out.push_back(incoming_edge(tree, t.index));
  }
  return out;
}

std::vector<DirectedEdge> edge_neighborhood(const DepTree& tree, const DirectedEdge& edge) {
  if (!tree.valid_index(edge.tail) || tree.head(edge.tail) != edge.head || edge.head == 0) {
    throw Error("edge " + std::to_string(edge.head) + "->" + std::to_string(edge.tail) +
                " is not a head link of the tree");
  }
  std::vector<DirectedEdge> out;
  if (tree.head(edge.head) != 0) out.push_back(incoming_edge(tree, edge.head));
  for (int child : tree.children(edge.tail)) out.push_back(incoming_edge(tree, child));
  return out;
}

int answer_word(const DepTree& tree) {
  for (const Token& t : tree.tokens()) {
    if (is_wh_word(to_lower(t.form))) return t.index;
  }
  return 1;
}

}  // namespace synkbqa::dep
