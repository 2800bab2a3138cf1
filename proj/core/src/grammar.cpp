#include "advseq/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace advseq::grammar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int Cfg::symbol_id(const std::string& name) const {
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> Cfg::terminal_ids() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (!nonterminal[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<bool> Cfg::nullable_set() const {
  std::vector<bool> nullable(symbols.size(), false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Production& p : productions) {
      if (nullable[static_cast<std::size_t>(p.lhs)]) continue;
      bool all = true;
      for (int s : p.rhs) {
        if (!nullable[static_cast<std::size_t>(s)]) {
          all = false;
          break;
        }
      }
      if (all) {
        nullable[static_cast<std::size_t>(p.lhs)] = true;
        changed = true;
      }
    }
  }
  return nullable;
}

CfgBuilder& CfgBuilder::rule(const std::string& lhs, const std::vector<std::string>& rhs) {
  rules_.emplace_back(lhs, rhs);
  return *this;
}

Cfg CfgBuilder::build() {
  if (rules_.empty()) throw Error("grammar has no productions");
  Cfg cfg;
  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    const int id = static_cast<int>(cfg.symbols.size());
    ids.emplace(name, id);
    cfg.symbols.push_back(name);
    cfg.nonterminal.push_back(false);
    return id;
  };
  for (const auto& [lhs, rhs] : rules_) {
    const int lhs_id = intern(lhs);
    cfg.nonterminal[static_cast<std::size_t>(lhs_id)] = true;
    if (cfg.start < 0) cfg.start = lhs_id;
  }
  std::set<std::pair<int, std::vector<int>>> seen;
  for (const auto& [lhs, rhs] : rules_) {
    Cfg::Production p;
    p.lhs = intern(lhs);
    for (const std::string& s : rhs) p.rhs.push_back(intern(s));
    if (!seen.emplace(p.lhs, p.rhs).second) {
      std::string text = lhs + " ->";
      for (const std::string& s : rhs) text += " " + s;
      throw Error("duplicate production: " + text);
    }
    cfg.productions.push_back(std::move(p));
  }
  cfg.by_lhs.assign(cfg.symbols.size(), {});
  for (std::size_t i = 0; i < cfg.productions.size(); ++i) {
    cfg.by_lhs[static_cast<std::size_t>(cfg.productions[i].lhs)].push_back(static_cast<int>(i));
  }
  return cfg;
}

namespace {

/// Shared line parser for the CFG and PCFG formats. When probabilities is
/// non-null, a trailing [p] is required on every alternative.
void parse_grammar_lines(const std::string& text,
                         std::vector<std::pair<std::string, std::vector<std::string>>>& rules,
                         std::vector<double>* probabilities) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::vector<std::string> toks = split_ws(line);
    if (toks.empty()) continue;
    auto arrow = std::find(toks.begin(), toks.end(), "->");
    if (arrow == toks.end()) {
      throw Error("line " + std::to_string(line_no) + ": missing '->'");
    }
    if (arrow != toks.begin() + 1) {
      throw Error("line " + std::to_string(line_no) +
                  ": left-hand side must be a single nonterminal symbol");
    }
    const std::string lhs = toks[0];
    std::vector<std::string> rhs;
    double prob = -1.0;
    auto flush = [&]() {
      if (probabilities != nullptr) {
        if (prob < 0.0) {
          throw Error("line " + std::to_string(line_no) +
                      ": missing probability, expected a trailing [p]");
        }
        probabilities->push_back(prob);
      }
      if (rhs.empty()) {
        throw Error("line " + std::to_string(line_no) + ": empty right-hand side");
      }
      rules.emplace_back(lhs, rhs);
      rhs.clear();
      prob = -1.0;
    };
    for (auto it = arrow + 1; it != toks.end(); ++it) {
      if (*it == "|") {
        flush();
      } else if (probabilities != nullptr && it->size() > 2 && it->front() == '[' &&
                 it->back() == ']') {
        try {
          prob = std::stod(it->substr(1, it->size() - 2));
        } catch (const std::exception&) {
          throw Error("line " + std::to_string(line_no) + ": bad probability " + *it);
        }
      } else {
        rhs.push_back(*it);
      }
    }
    flush();
  }
  if (rules.empty()) throw Error("grammar has no productions");
}

}  // namespace

Cfg load_cfg(const std::string& text) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rules;
  parse_grammar_lines(text, rules, nullptr);
  CfgBuilder builder;
  for (const auto& [lhs, rhs] : rules) builder.rule(lhs, rhs);
  return builder.build();
}

Cfg load_cfg_file(const std::string& path) { return load_cfg(read_file(path)); }

// --- sampling ------------------------------------------------------------------

namespace {

struct Sampler {
  const Cfg& cfg;
  std::mt19937_64& rng;
  const SampleOptions& opts;
  std::int64_t target;
  std::vector<int> yield;
  bool failed = false;

  void expand(int symbol, std::int64_t depth) {
    if (failed) return;
    if (!cfg.is_nonterminal(symbol)) {
      yield.push_back(symbol);
      if (static_cast<std::int64_t>(yield.size()) > target) failed = true;
      return;
    }
    if (depth > opts.max_depth) {
      failed = true;
      return;
    }
    const std::vector<int>& options = cfg.by_lhs[static_cast<std::size_t>(symbol)];
    if (options.empty()) {
      failed = true;  // nonterminal with no production cannot yield a string
      return;
    }
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    const Cfg::Production& p = cfg.productions[static_cast<std::size_t>(options[pick(rng)])];
    for (int s : p.rhs) expand(s, depth + 1);
  }
};

}  // namespace

std::vector<std::string> sample_cfg(const Cfg& cfg, std::int64_t target_length,
                                    std::mt19937_64& rng, const SampleOptions& opts) {
  if (target_length < 0) throw Error("sample_cfg: negative target length");
  for (std::int64_t attempt = 0; attempt < opts.max_retries; ++attempt) {
    Sampler s{cfg, rng, opts, target_length, {}, false};
    s.expand(cfg.start, 0);
    if (!s.failed && static_cast<std::int64_t>(s.yield.size()) == target_length) {
      std::vector<std::string> out;
      out.reserve(s.yield.size());
      for (int id : s.yield) out.push_back(cfg.name(id));
      return out;
    }
  }
  throw Error("sample_cfg: no sample of length " + std::to_string(target_length) + " within " +
              std::to_string(opts.max_retries) + " attempts");
}

// --- Earley ---------------------------------------------------------------------

namespace {

struct EarleyItem {
  std::int32_t prod;
  std::int32_t dot;
  std::int32_t origin;
};

std::uint64_t item_key(const EarleyItem& it) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(it.prod)) << 40) |
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(it.dot)) << 32) |
         static_cast<std::uint32_t>(it.origin);
}

}  // namespace

bool earley_recognize(const Cfg& cfg, std::span<const std::string> tokens) {
  std::vector<int> input;
  input.reserve(tokens.size());
  for (const std::string& t : tokens) {
    const int id = cfg.symbol_id(t);
    if (id < 0 || cfg.is_nonterminal(id)) return false;  // out of vocabulary
    input.push_back(id);
  }
  const std::int64_t n = static_cast<std::int64_t>(input.size());
  const std::vector<bool> nullable = cfg.nullable_set();

  std::vector<std::vector<EarleyItem>> chart(static_cast<std::size_t>(n + 1));
  std::vector<std::unordered_set<std::uint64_t>> seen(static_cast<std::size_t>(n + 1));
  // per position: next-symbol -> indices of items waiting on it
  std::vector<std::unordered_map<int, std::vector<std::int32_t>>> waiting(
      static_cast<std::size_t>(n + 1));

  auto push = [&](std::int64_t pos, EarleyItem item) {
    if (seen[static_cast<std::size_t>(pos)].insert(item_key(item)).second) {
      chart[static_cast<std::size_t>(pos)].push_back(item);
    }
  };

  for (int p : cfg.by_lhs[static_cast<std::size_t>(cfg.start)]) push(0, {p, 0, 0});

  for (std::int64_t pos = 0; pos <= n; ++pos) {
    auto& items = chart[static_cast<std::size_t>(pos)];
    for (std::size_t idx = 0; idx < items.size(); ++idx) {
      const EarleyItem item = items[idx];
      const Cfg::Production& prod = cfg.productions[static_cast<std::size_t>(item.prod)];
      if (item.dot < static_cast<std::int32_t>(prod.rhs.size())) {
        const int sym = prod.rhs[static_cast<std::size_t>(item.dot)];
        if (cfg.is_nonterminal(sym)) {
          waiting[static_cast<std::size_t>(pos)][sym].push_back(static_cast<std::int32_t>(idx));
          for (int p : cfg.by_lhs[static_cast<std::size_t>(sym)]) {
            push(pos, {p, 0, static_cast<std::int32_t>(pos)});
          }
          // nullable prediction: complete over the empty span immediately
          if (nullable[static_cast<std::size_t>(sym)]) {
            push(pos, {item.prod, item.dot + 1, item.origin});
          }
        } else if (pos < n && sym == input[static_cast<std::size_t>(pos)]) {
          push(pos + 1, {item.prod, item.dot + 1, item.origin});
        }
      } else {
        // complete: advance everything at the origin waiting on this lhs
        auto& wait_map = waiting[static_cast<std::size_t>(item.origin)];
        auto it = wait_map.find(prod.lhs);
        if (it != wait_map.end()) {
          for (std::size_t w = 0; w < it->second.size(); ++w) {
            const EarleyItem parent =
                chart[static_cast<std::size_t>(item.origin)][static_cast<std::size_t>(
                    it->second[w])];
            push(pos, {parent.prod, parent.dot + 1, parent.origin});
          }
        }
      }
    }
  }

  for (const EarleyItem& item : chart[static_cast<std::size_t>(n)]) {
    const Cfg::Production& prod = cfg.productions[static_cast<std::size_t>(item.prod)];
    if (prod.lhs == cfg.start && item.origin == 0 &&
        item.dot == static_cast<std::int32_t>(prod.rhs.size())) {
      return true;
    }
  }
  return false;
}

// --- treebank -------------------------------------------------------------------

namespace {

struct TreeParser {
  const std::string& line;
  int line_no;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("treebank line " + std::to_string(line_no) + ": " + what);
  }

  void skip_ws() {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
  }

  std::string atom() {
    const std::size_t begin = pos;
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos])) &&
           line[pos] != '(' && line[pos] != ')') {
      ++pos;
    }
    if (pos == begin) fail("expected a symbol");
    return line.substr(begin, pos - begin);
  }

  TreeNode tree() {
    skip_ws();
    if (pos >= line.size() || line[pos] != '(') fail("expected '('");
    ++pos;
    skip_ws();
    TreeNode node;
    node.label = atom();
    skip_ws();
    if (pos >= line.size() || line[pos] == ')') fail("node '" + node.label + "' has no children");
    while (pos < line.size() && line[pos] != ')') {
      if (line[pos] == '(') {
        node.children.push_back(tree());
      } else {
        node.children.push_back(TreeNode{atom(), {}});
      }
      skip_ws();
    }
    if (pos >= line.size()) fail("unbalanced brackets");
    ++pos;  // consume ')'
    return node;
  }
};

}  // namespace

TreeNode parse_tree(const std::string& line, int line_number) {
  TreeParser parser{line, line_number};
  TreeNode root = parser.tree();
  parser.skip_ws();
  if (parser.pos != line.size()) parser.fail("trailing text after tree");
  return root;
}

std::vector<TreeNode> load_treebank_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<TreeNode> trees;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool blank = true;
    for (char c : line) {
      if (!std::isspace(static_cast<unsigned char>(c))) {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    trees.push_back(parse_tree(line, line_no));
  }
  return trees;
}

// --- PCFG induction -------------------------------------------------------------

void Pcfg::validate(double tol) const {
  if (prob.size() != cfg.productions.size()) {
    throw Error("pcfg: probability list does not match productions");
  }
  std::vector<double> sums(cfg.symbols.size(), 0.0);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!(prob[i] > 0.0 && prob[i] <= 1.0)) {
      throw Error("pcfg: production probability " + std::to_string(prob[i]) +
                  " outside (0, 1]");
    }
    sums[static_cast<std::size_t>(cfg.productions[i].lhs)] += prob[i];
  }
  for (std::size_t s = 0; s < sums.size(); ++s) {
    if (!cfg.nonterminal[s]) continue;
    if (cfg.by_lhs[s].empty()) continue;
    if (std::abs(sums[s] - 1.0) > tol) {
      throw Error("pcfg: probabilities of " + cfg.symbols[s] + " sum to " +
                  std::to_string(sums[s]));
    }
  }
}

namespace {

/// Strips function tags and indices: NP-SBJ, NP=2 -> NP. A label whose strip
/// would be empty (e.g. -NONE-) is kept whole.
std::string normalize_label(const std::string& label) {
  const std::size_t cut = label.find_first_of("-=");
  if (cut == std::string::npos || cut == 0) return label;
  return label.substr(0, cut);
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void count_terminals(const TreeNode& node, std::map<std::string, std::int64_t>& freq) {
  for (const TreeNode& child : node.children) {
    if (child.leaf()) {
      ++freq[lowercase(child.label)];
    } else {
      count_terminals(child, freq);
    }
  }
}

void count_rewrites(
    const TreeNode& node,
    const std::unordered_set<std::string>* keep,
    std::map<std::pair<std::string, std::vector<std::string>>, std::int64_t>& counts) {
  if (node.leaf()) return;
  std::vector<std::string> rhs;
  rhs.reserve(node.children.size());
  for (const TreeNode& child : node.children) {
    if (child.leaf()) {
      std::string word = lowercase(child.label);
      if (keep != nullptr && keep->count(word) == 0) word = kUnknownTerminal;
      rhs.push_back(std::move(word));
    } else {
      rhs.push_back(normalize_label(child.label));
    }
  }
  ++counts[{normalize_label(node.label), std::move(rhs)}];
  for (const TreeNode& child : node.children) count_rewrites(child, keep, counts);
}

}  // namespace

Pcfg induce_pcfg(const std::vector<TreeNode>& trees, std::int64_t vocab_top_k) {
  if (trees.empty()) throw Error("induce_pcfg: empty treebank");

  std::unordered_set<std::string> keep;
  const std::unordered_set<std::string>* keep_ptr = nullptr;
  if (vocab_top_k > 0) {
    std::map<std::string, std::int64_t> freq;
    for (const TreeNode& t : trees) count_terminals(t, freq);
    std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(vocab_top_k); ++i) {
      keep.insert(ranked[i].first);
    }
    keep_ptr = &keep;
  }

  std::map<std::pair<std::string, std::vector<std::string>>, std::int64_t> counts;
  for (const TreeNode& t : trees) count_rewrites(t, keep_ptr, counts);
  if (counts.empty()) throw Error("induce_pcfg: treebank has no internal rewrites");

  std::map<std::string, std::int64_t> lhs_totals;
  for (const auto& [key, c] : counts) lhs_totals[key.first] += c;

  // Keep the start symbol first: the root label of the first tree.
  const std::string start = normalize_label(trees.front().label);
  CfgBuilder builder;
  std::vector<double> probs;
  auto add = [&](const std::string& lhs) {
    for (const auto& [key, c] : counts) {
      if (key.first != lhs) continue;
      builder.rule(key.first, key.second);
      probs.push_back(static_cast<double>(c) / static_cast<double>(lhs_totals[key.first]));
    }
  };
  add(start);
  for (const auto& [lhs, total] : lhs_totals) {
    (void)total;
    if (lhs != start) add(lhs);
  }

  Pcfg out{builder.build(), std::move(probs)};
  out.validate();
  return out;
}

// --- binarization ----------------------------------------------------------------

bool is_binarized(const Pcfg& pcfg) {
  for (const Cfg::Production& p : pcfg.cfg.productions) {
    if (p.rhs.empty() || p.rhs.size() > 2) return false;
    if (p.rhs.size() == 2 &&
        (!pcfg.cfg.is_nonterminal(p.rhs[0]) || !pcfg.cfg.is_nonterminal(p.rhs[1]))) {
      return false;
    }
  }
  return true;
}

Pcfg binarize_pcfg(const Pcfg& pcfg) {
  pcfg.validate();
  if (is_binarized(pcfg)) return pcfg;

  const Cfg& cfg = pcfg.cfg;
  CfgBuilder builder;
  std::vector<double> probs;
  std::set<std::string> emitted_aux;

  auto wrap_terminal = [&](int sym) -> std::string {
    const std::string name = "@t:" + cfg.name(sym);
    if (emitted_aux.insert(name).second) {
      builder.rule(name, {cfg.name(sym)});
      probs.push_back(1.0);
    }
    return name;
  };
  // A rhs symbol usable inside a binary rule: nonterminals as-is, terminals
  // behind a fresh preterminal.
  auto as_nt = [&](int sym) {
    return cfg.is_nonterminal(sym) ? cfg.name(sym) : wrap_terminal(sym);
  };
  auto remainder_name = [&](const std::vector<int>& rhs, std::size_t from) {
    std::string name = "@s:";
    for (std::size_t i = from; i < rhs.size(); ++i) {
      if (i > from) name += "+";
      name += cfg.name(rhs[i]);
    }
    return name;
  };

  for (std::size_t pi = 0; pi < cfg.productions.size(); ++pi) {
    const Cfg::Production& p = cfg.productions[pi];
    const double prob = pcfg.prob[pi];
    const std::string lhs = cfg.name(p.lhs);
    if (p.rhs.empty()) {
      throw Error("binarize_pcfg: epsilon production on " + lhs + " is unsupported");
    }
    if (p.rhs.size() == 1) {
      builder.rule(lhs, {cfg.name(p.rhs[0])});
      probs.push_back(prob);
      continue;
    }
    if (p.rhs.size() == 2) {
      builder.rule(lhs, {as_nt(p.rhs[0]), as_nt(p.rhs[1])});
      probs.push_back(prob);
      continue;
    }
    // right binarization: lhs -> X1 @s:(X2..Xm), chain carries probability 1
    builder.rule(lhs, {as_nt(p.rhs[0]), remainder_name(p.rhs, 1)});
    probs.push_back(prob);
    for (std::size_t i = 1; i + 2 < p.rhs.size(); ++i) {
      const std::string name = remainder_name(p.rhs, i);
      if (emitted_aux.insert(name).second) {
        builder.rule(name, {as_nt(p.rhs[i]), remainder_name(p.rhs, i + 1)});
        probs.push_back(1.0);
      }
    }
    const std::size_t last = p.rhs.size() - 2;
    const std::string name = remainder_name(p.rhs, last);
    if (emitted_aux.insert(name).second) {
      builder.rule(name, {as_nt(p.rhs[last]), as_nt(p.rhs[last + 1])});
      probs.push_back(1.0);
    }
  }

  Pcfg out{builder.build(), std::move(probs)};
  // Re-point the start symbol: builder used insertion order, but auxiliary
  // wrapper rules may have been emitted before the first original rule.
  out.cfg.start = out.cfg.symbol_id(cfg.name(cfg.start));
  out.validate();
  return out;
}

// --- Viterbi chart parsing --------------------------------------------------------

std::optional<double> viterbi_nll(const Pcfg& pcfg, std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error("viterbi_nll: empty token sequence");
  if (!is_binarized(pcfg)) {
    throw Error("viterbi_nll: grammar must be binarized (lexical, unit, or binary rules)");
  }
  const Cfg& cfg = pcfg.cfg;

  std::vector<int> input;
  input.reserve(tokens.size());
  for (const std::string& t : tokens) {
    const int id = cfg.symbol_id(t);
    if (id < 0 || cfg.is_nonterminal(id)) return std::nullopt;
    input.push_back(id);
  }
  const std::size_t n = input.size();
  const std::size_t nsym = cfg.symbols.size();

  struct BinaryRule {
    int lhs, left, right;
    double logp;
  };
  struct UnitRule {
    int lhs, child;
    double logp;
  };
  std::vector<BinaryRule> binary;
  std::vector<UnitRule> unit;
  std::unordered_map<int, std::vector<std::pair<int, double>>> lexical;  // terminal -> (lhs, logp)
  for (std::size_t i = 0; i < cfg.productions.size(); ++i) {
    const Cfg::Production& p = cfg.productions[i];
    const double lp = std::log(pcfg.prob[i]);
    if (p.rhs.size() == 2) {
      binary.push_back({p.lhs, p.rhs[0], p.rhs[1], lp});
    } else if (cfg.is_nonterminal(p.rhs[0])) {
      unit.push_back({p.lhs, p.rhs[0], lp});
    } else {
      lexical[p.rhs[0]].push_back({p.lhs, lp});
    }
  }

  // chart[start][len-1] -> best log-probability per nonterminal
  auto cell = [&](std::size_t start, std::size_t len) -> std::size_t {
    return (start * n + (len - 1)) * nsym;
  };
  std::vector<double> best(n * n * nsym, kNegInf);

  auto close_units = [&](std::size_t base) {
    // relaxation; beneficial unit chains never revisit a nonterminal
    for (std::size_t pass = 0; pass < nsym; ++pass) {
      bool improved = false;
      for (const UnitRule& r : unit) {
        const double cand = best[base + static_cast<std::size_t>(r.child)] + r.logp;
        if (cand > best[base + static_cast<std::size_t>(r.lhs)]) {
          best[base + static_cast<std::size_t>(r.lhs)] = cand;
          improved = true;
        }
      }
      if (!improved) break;
    }
  };

  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t base = cell(s, 1);
    auto it = lexical.find(input[s]);
    if (it != lexical.end()) {
      for (const auto& [lhs, lp] : it->second) {
        best[base + static_cast<std::size_t>(lhs)] =
            std::max(best[base + static_cast<std::size_t>(lhs)], lp);
      }
    }
    close_units(base);
  }

  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t s = 0; s + len <= n; ++s) {
      const std::size_t base = cell(s, len);
      for (std::size_t split = 1; split < len; ++split) {
        const std::size_t lbase = cell(s, split);
        const std::size_t rbase = cell(s + split, len - split);
        for (const BinaryRule& r : binary) {
          const double lv = best[lbase + static_cast<std::size_t>(r.left)];
          if (lv == kNegInf) continue;
          const double rv = best[rbase + static_cast<std::size_t>(r.right)];
          if (rv == kNegInf) continue;
          const double cand = lv + rv + r.logp;
          if (cand > best[base + static_cast<std::size_t>(r.lhs)]) {
            best[base + static_cast<std::size_t>(r.lhs)] = cand;
          }
        }
      }
      close_units(base);
    }
  }

  const double lp = best[cell(0, n) + static_cast<std::size_t>(cfg.start)];
  if (lp == kNegInf) return std::nullopt;
  return -lp;
}

// --- PCFG file format --------------------------------------------------------------

Pcfg load_pcfg(const std::string& text) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rules;
  std::vector<double> probs;
  parse_grammar_lines(text, rules, &probs);
  CfgBuilder builder;
  for (const auto& [lhs, rhs] : rules) builder.rule(lhs, rhs);
  Pcfg out{builder.build(), std::move(probs)};
  out.validate(1e-6);  // text round-trips tolerate printed precision
  return out;
}

Pcfg load_pcfg_file(const std::string& path) { return load_pcfg(read_file(path)); }

std::string format_pcfg(const Pcfg& pcfg) {
  std::ostringstream os;
  char buf[64];
  for (std::size_t i = 0; i < pcfg.cfg.productions.size(); ++i) {
    const Cfg::Production& p = pcfg.cfg.productions[i];
    os << pcfg.cfg.name(p.lhs) << " ->";
    for (int s : p.rhs) os << ' ' << pcfg.cfg.name(s);
    std::snprintf(buf, sizeof(buf), "%.17g", pcfg.prob[i]);
    os << " [" << buf << "]\n";
  }
  return os.str();
}

}  // namespace advseq::grammar
