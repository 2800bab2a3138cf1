#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "advseq/tensor.hpp"

namespace advseq::data {

using ad::Tensor;

enum class TokenLevel { kWord, kCharacter };

TokenLevel parse_level(const std::string& name);

/// Whitespace split at word level; single code points (UTF-8 aware) at
/// character level.
std::vector<std::string> tokenize(const std::string& line, TokenLevel level);

/// Bidirectional token <-> index map. Reserved tokens occupy the fixed
/// lowest indices in the order unknown, sentence-start, sentence-end, pad.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;
  static constexpr int kSentenceStart = 1;
  static constexpr int kSentenceEnd = 2;
  static constexpr int kPad = 3;
  static constexpr int kReservedCount = 4;

  static const char* reserved_name(int index);

  /// Tokens ranked by corpus frequency, ties broken lexicographically; at
  /// most top_k non-reserved tokens are kept, the rest map to unknown.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          std::int64_t top_k);

  /// Rebuild from an explicit ordered token list (checkpoint restore). The
  /// list must start with the four reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int64_t size() const { return static_cast<std::int64_t>(tokens_.size()); }
  const std::string& token(int index) const;
  int index(const std::string& token) const;  // kUnknown when absent
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& indices) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, int>> index_;  // sorted by token
};

/// One sentence per line, UTF-8.
std::vector<std::vector<std::string>> load_corpus_file(const std::string& path,
                                                       TokenLevel level);

/// n x k matrix with exactly one 1.0 per row. Sentences shorter than n are
/// padded with the pad token, longer ones truncated.
Tensor encode_one_hot(const std::vector<int>& sentence, const Vocabulary& vocab,
                      std::int64_t length);

/// (batch, n, k) stack of one-hot matrices.
Tensor encode_one_hot_batch(const std::vector<std::vector<int>>& sentences,
                            const Vocabulary& vocab, std::int64_t length);

std::vector<int> decode_one_hot(const Tensor& matrix);

struct LabeledCorpus {
  std::vector<std::vector<std::string>> sentences;
  std::vector<int> labels;  // empty, or one 0/1 label per sentence
};

enum class AttributeRule { kQuestion, kSentimentFile };

/// question: label 1 iff the "?" token is present. sentiment-file: labels
/// read from a file with one 0/1 per line, aligned with the corpus.
LabeledCorpus label_attribute(std::vector<std::vector<std::string>> corpus, AttributeRule rule,
                              const std::string& sentiment_path = "");

/// Sequence-length schedule: length = min(max, start + epoch / epochs_per_increment).
struct CurriculumState {
  std::int64_t current_length = 5;
  std::int64_t start_length = 5;
  std::int64_t epochs_per_increment = 3;
  std::int64_t max_length = 5;
};

CurriculumState curriculum_advance(CurriculumState state, std::int64_t epoch);

}  // namespace advseq::data
