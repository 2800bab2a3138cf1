#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advseq/tensor.hpp"  // for advseq::Error

namespace advseq::grammar {

/// Context-free grammar over interned symbols. Nonterminals are exactly the
/// symbols that appear on a left-hand side; the start symbol is the first
/// left-hand side seen.
class Cfg {
 public:
  struct Production {
    int lhs;
    std::vector<int> rhs;  // empty rhs is an epsilon production
    bool operator==(const Production&) const = default;
  };

  int start = -1;
  std::vector<std::string> symbols;       // id -> name
  std::vector<bool> nonterminal;          // id -> appears as some lhs
  std::vector<Production> productions;
  std::vector<std::vector<int>> by_lhs;   // nonterminal id -> production indices

  int symbol_id(const std::string& name) const;  // -1 when unknown
  const std::string& name(int id) const { return symbols[static_cast<std::size_t>(id)]; }
  bool is_nonterminal(int id) const { return nonterminal[static_cast<std::size_t>(id)]; }
  std::vector<int> terminal_ids() const;

  /// True for every nonterminal that derives the empty string.
  std::vector<bool> nullable_set() const;
};

/// Programmatic construction; the first rule's lhs becomes the start symbol.
class CfgBuilder {
 public:
  CfgBuilder& rule(const std::string& lhs, const std::vector<std::string>& rhs);
  Cfg build();

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> rules_;
};

/// Parses the production-per-line format:
///   LHS -> sym sym ... | alt ...
/// '#' starts a comment; the first lhs is the start symbol.
Cfg load_cfg(const std::string& text);
Cfg load_cfg_file(const std::string& path);

struct SampleOptions {
  std::int64_t max_depth = 50;      // derivation-tree depth cap per attempt
  std::int64_t max_retries = 10000; // rejection-sampling budget per sample
};

/// Leftmost expansion choosing uniformly among a nonterminal's productions,
/// rejection-sampled until the yield has exactly target_length tokens.
std::vector<std::string> sample_cfg(const Cfg& cfg, std::int64_t target_length,
                                    std::mt19937_64& rng, const SampleOptions& opts = {});

/// Standard Earley recognition (predict/scan/complete, epsilon productions
/// supported). Out-of-vocabulary tokens reject rather than error.
bool earley_recognize(const Cfg& cfg, std::span<const std::string> tokens);

// --- treebanks and PCFGs ------------------------------------------------------

struct TreeNode {
  std::string label;  // nonterminal label, or the token itself for leaves
  std::vector<TreeNode> children;
  bool leaf() const { return children.empty(); }
};

/// Parses one bracketed tree `(LABEL child ...)`; terminals are leaves.
TreeNode parse_tree(const std::string& line, int line_number = 0);
std::vector<TreeNode> load_treebank_file(const std::string& path);

struct Pcfg {
  Cfg cfg;
  std::vector<double> prob;  // parallel to cfg.productions, each in (0, 1]

  /// Per nonterminal, production probabilities must sum to 1 +- tol.
  void validate(double tol = 1e-9) const;
};

/// Relative-frequency estimation P(A -> alpha) = count(A -> alpha) / count(A -> *)
/// over all internal rewrites of the trees. Labels are stripped of function
/// tags and indices, terminals lowercased; when vocab_top_k > 0 terminals
/// outside the top-k by frequency are replaced by an unknown token that keeps
/// its own counts.
Pcfg induce_pcfg(const std::vector<TreeNode>& trees, std::int64_t vocab_top_k = 0);

inline constexpr const char* kUnknownTerminal = "<unk>";

/// Right binarization. Original rules keep their probability on the top
/// rule; introduced remainder and preterminal-wrapper rules carry
/// probability 1, so every derivation's total probability is preserved.
/// Lexical (A -> a) and unit (A -> B) rules pass through unchanged.
Pcfg binarize_pcfg(const Pcfg& pcfg);

/// True when every production is lexical, unit, or binary over nonterminals.
bool is_binarized(const Pcfg& pcfg);

/// -log of the maximum-probability parse under a binarized PCFG; nullopt when
/// the tokens have no parse.
std::optional<double> viterbi_nll(const Pcfg& binarized, std::span<const std::string> tokens);

/// Grammar text with a trailing probability per production: LHS -> sym ... [p]
Pcfg load_pcfg(const std::string& text);
Pcfg load_pcfg_file(const std::string& path);
std::string format_pcfg(const Pcfg& pcfg);

}  // namespace advseq::grammar
