#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "advseq/grammar.hpp"
#include "advseq/rng.hpp"

namespace advseq::testing {

namespace gr = advseq::grammar;

// --- exhaustive language enumeration (Earley oracle) --------------------------

/// Fixed-point enumeration of every terminal string of length <= max_len
/// derivable from each symbol; exact, no depth cap.
class LanguageOracle {
 public:
  LanguageOracle(const gr::Cfg& cfg, std::size_t max_len) : cfg_(cfg), max_len_(max_len) {
    derivable_.resize(cfg.symbols.size());
    for (std::size_t s = 0; s < cfg.symbols.size(); ++s) {
      if (!cfg.nonterminal[s]) {
        derivable_[s].insert({static_cast<int>(s)});
      }
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (const gr::Cfg::Production& p : cfg.productions) {
        std::set<std::vector<int>> combos;
        combos.insert(std::vector<int>{});
        for (int sym : p.rhs) {
          std::set<std::vector<int>> next;
          for (const std::vector<int>& prefix : combos) {
            for (const std::vector<int>& cont : derivable_[static_cast<std::size_t>(sym)]) {
              if (prefix.size() + cont.size() > max_len_) continue;
              std::vector<int> joined = prefix;
              joined.insert(joined.end(), cont.begin(), cont.end());
              next.insert(std::move(joined));
            }
          }
          combos = std::move(next);
          if (combos.empty()) break;
        }
        for (const std::vector<int>& s : combos) {
          if (derivable_[static_cast<std::size_t>(p.lhs)].insert(s).second) changed = true;
        }
      }
    }
  }

  bool accepts(const std::vector<int>& terminal_ids) const {
    return derivable_[static_cast<std::size_t>(cfg_.start)].count(terminal_ids) != 0;
  }

 private:
  const gr::Cfg& cfg_;
  std::size_t max_len_;
  std::vector<std::set<std::vector<int>>> derivable_;
};

/// Every string of length <= max_len over the grammar's terminal alphabet.
inline std::vector<std::vector<int>> all_strings(const gr::Cfg& cfg, std::size_t max_len) {
  const std::vector<int> terminals = cfg.terminal_ids();
  std::vector<std::vector<int>> out;
  out.push_back({});
  std::size_t level_begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (int t : terminals) {
        std::vector<int> s = out[i];
        s.push_back(t);
        out.push_back(std::move(s));
      }
    }
    level_begin = level_end;
  }
  return out;
}

inline std::vector<std::string> to_tokens(const gr::Cfg& cfg, const std::vector<int>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(cfg.name(id));
  return out;
}

// --- exhaustive best-parse search (Viterbi oracle) -----------------------------

/// Maximum derivation log-probability by explicit search over all rule
/// applications and split points, memoized per (symbol, span); unit cycles
/// are cut (they multiply by probabilities <= 1 and never improve the max).
class BestParseOracle {
 public:
  BestParseOracle(const gr::Pcfg& pcfg, std::vector<int> tokens)
      : pcfg_(pcfg), tokens_(std::move(tokens)) {}

  std::optional<double> best_nll() {
    const double lp =
        best(pcfg_.cfg.start, 0, static_cast<int>(tokens_.size()));
    if (lp == kNegInf) return std::nullopt;
    return -lp;
  }

 private:
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  double best(int symbol, int from, int to) {
    if (!pcfg_.cfg.is_nonterminal(symbol)) {
      return (to - from == 1 && tokens_[static_cast<std::size_t>(from)] == symbol) ? 0.0
                                                                                   : kNegInf;
    }
    const std::tuple<int, int, int> key{symbol, from, to};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (!stack_.insert(key).second) return kNegInf;  // cycle cut

    double result = kNegInf;
    for (int pi : pcfg_.cfg.by_lhs[static_cast<std::size_t>(symbol)]) {
      const gr::Cfg::Production& p = pcfg_.cfg.productions[static_cast<std::size_t>(pi)];
      const double rule_lp = std::log(pcfg_.prob[static_cast<std::size_t>(pi)]);
      result = std::max(result, rule_lp + best_split(p.rhs, 0, from, to));
    }
    stack_.erase(key);
    memo_[key] = result;
    return result;
  }

  double best_split(const std::vector<int>& rhs, std::size_t idx, int from, int to) {
    if (idx == rhs.size()) return from == to ? 0.0 : kNegInf;
    const int remaining = static_cast<int>(rhs.size() - idx - 1);
    double result = kNegInf;
    // every child consumes at least one token
    for (int mid = from + 1; mid <= to - remaining; ++mid) {
      const double head = best(rhs[idx], from, mid);
      if (head == kNegInf) continue;
      const double tail = best_split(rhs, idx + 1, mid, to);
      if (tail == kNegInf) continue;
      result = std::max(result, head + tail);
    }
    return result;
  }

  const gr::Pcfg& pcfg_;
  std::vector<int> tokens_;
  std::map<std::tuple<int, int, int>, double> memo_;
  std::set<std::tuple<int, int, int>> stack_;
};

// --- random grammar generators --------------------------------------------------

/// Random CFG with at most 6 productions and right-hand sides of at most 4
/// symbols; epsilon and unit productions included.
inline gr::Cfg random_cfg(std::mt19937_64& rng) {
  const std::vector<std::string> nts{"S", "A", "B"};
  const std::vector<std::string> ts{"a", "b", "c"};
  for (;;) {
    std::uniform_int_distribution<int> n_prod_dist(2, 6);
    std::uniform_int_distribution<int> nt_dist(0, 2);
    std::uniform_int_distribution<int> t_dist(0, 2);
    std::uniform_int_distribution<int> len_dist(0, 4);
    std::uniform_int_distribution<int> kind_dist(0, 99);
    const int n_prod = n_prod_dist(rng);
    std::set<std::pair<std::string, std::vector<std::string>>> seen;
    gr::CfgBuilder builder;
    bool duplicate = false;
    for (int i = 0; i < n_prod; ++i) {
      const std::string lhs = i == 0 ? "S" : nts[static_cast<std::size_t>(nt_dist(rng))];
      const int len = len_dist(rng);
      std::vector<std::string> rhs;
      for (int j = 0; j < len; ++j) {
        if (kind_dist(rng) < 45) {
          rhs.push_back(nts[static_cast<std::size_t>(nt_dist(rng))]);
        } else {
          rhs.push_back(ts[static_cast<std::size_t>(t_dist(rng))]);
        }
      }
      if (!seen.emplace(lhs, rhs).second) {
        duplicate = true;
        break;
      }
      builder.rule(lhs, rhs);
    }
    if (duplicate) continue;
    gr::Cfg cfg = builder.build();
    // keep only grammars where every referenced nonterminal has a rule
    bool productive = true;
    for (const gr::Cfg::Production& p : cfg.productions) {
      for (int s : p.rhs) {
        if (cfg.is_nonterminal(s) && cfg.by_lhs[static_cast<std::size_t>(s)].empty()) {
          productive = false;
        }
      }
    }
    if (productive) return cfg;
  }
}

/// Random tiny PCFG: no epsilon productions, normalized probabilities, every
/// nonterminal productive.
inline gr::Pcfg random_pcfg(std::mt19937_64& rng) {
  const std::vector<std::string> nts{"S", "A", "B"};
  const std::vector<std::string> ts{"a", "b", "c"};
  for (;;) {
    std::uniform_int_distribution<int> n_nt_dist(1, 3);
    std::uniform_int_distribution<int> n_rule_dist(1, 3);
    std::uniform_int_distribution<int> len_dist(1, 3);
    std::uniform_int_distribution<int> t_dist(0, 2);
    std::uniform_int_distribution<int> kind_dist(0, 99);
    std::uniform_real_distribution<double> weight_dist(0.2, 1.0);
    const int n_nt = n_nt_dist(rng);
    std::uniform_int_distribution<int> nt_dist(0, n_nt - 1);

    gr::CfgBuilder builder;
    std::vector<double> weights;
    std::set<std::pair<std::string, std::vector<std::string>>> seen;
    bool duplicate = false;
    for (int nt = 0; nt < n_nt && !duplicate; ++nt) {
      const int n_rules = n_rule_dist(rng);
      for (int r = 0; r < n_rules; ++r) {
        std::vector<std::string> rhs;
        const int len = len_dist(rng);
        for (int j = 0; j < len; ++j) {
          // bias toward terminals so derivations terminate
          if (kind_dist(rng) < 35) {
            rhs.push_back(nts[static_cast<std::size_t>(nt_dist(rng))]);
          } else {
            rhs.push_back(ts[static_cast<std::size_t>(t_dist(rng))]);
          }
        }
        if (!seen.emplace(nts[static_cast<std::size_t>(nt)], rhs).second) {
          duplicate = true;
          break;
        }
        builder.rule(nts[static_cast<std::size_t>(nt)], rhs);
        weights.push_back(weight_dist(rng));
      }
    }
    if (duplicate) continue;

    gr::Cfg cfg = builder.build();
    bool productive = true;
    for (const gr::Cfg::Production& p : cfg.productions) {
      for (int s : p.rhs) {
        if (cfg.is_nonterminal(s) && cfg.by_lhs[static_cast<std::size_t>(s)].empty()) {
          productive = false;
        }
      }
    }
    if (!productive) continue;

    std::vector<double> sums(cfg.symbols.size(), 0.0);
    for (std::size_t i = 0; i < cfg.productions.size(); ++i) {
      sums[static_cast<std::size_t>(cfg.productions[i].lhs)] += weights[i];
    }
    gr::Pcfg pcfg{std::move(cfg), std::move(weights)};
    for (std::size_t i = 0; i < pcfg.prob.size(); ++i) {
      pcfg.prob[i] /= sums[static_cast<std::size_t>(pcfg.cfg.productions[i].lhs)];
    }
    pcfg.validate(1e-9);
    return pcfg;
  }
}

/// Weighted sampling from a PCFG with a depth cap; nullopt when the attempt
/// exceeds the cap or the yield exceeds max_len.
inline std::optional<std::vector<int>> sample_pcfg_once(const gr::Pcfg& pcfg,
                                                        std::size_t max_len,
                                                        std::mt19937_64& rng) {
  std::vector<int> yield;
  bool failed = false;
  auto expand = [&](auto&& self, int symbol, int depth) -> void {
    if (failed) return;
    if (!pcfg.cfg.is_nonterminal(symbol)) {
      yield.push_back(symbol);
      if (yield.size() > max_len) failed = true;
      return;
    }
    if (depth > 40) {
      failed = true;
      return;
    }
    const std::vector<int>& options = pcfg.cfg.by_lhs[static_cast<std::size_t>(symbol)];
    std::vector<double> probs;
    probs.reserve(options.size());
    for (int pi : options) probs.push_back(pcfg.prob[static_cast<std::size_t>(pi)]);
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    const gr::Cfg::Production& p =
        pcfg.cfg.productions[static_cast<std::size_t>(options[pick(rng)])];
    for (int s : p.rhs) self(self, s, depth + 1);
  };
  expand(expand, pcfg.cfg.start, 0);
  if (failed || yield.empty()) return std::nullopt;
  return yield;
}

}  // namespace advseq::testing
