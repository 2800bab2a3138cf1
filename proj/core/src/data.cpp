#include "advseq/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace advseq::data {

using ad::shape_str;

TokenLevel parse_level(const std::string& name) {
  if (name == "word") return TokenLevel::kWord;
  if (name == "char" || name == "character") return TokenLevel::kCharacter;
  throw Error("unknown token level '" + name + "' (expected word|char)");
}

std::vector<std::string> tokenize(const std::string& line, TokenLevel level) {
  std::vector<std::string> out;
  if (level == TokenLevel::kWord) {
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
  }
  // character level: one token per UTF-8 code point
  std::size_t i = 0;
  while (i < line.size()) {
    const unsigned char c = static_cast<unsigned char>(line[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    len = std::min(len, line.size() - i);
    out.push_back(line.substr(i, len));
    i += len;
  }
  return out;
}

const char* Vocabulary::reserved_name(int index) {
  switch (index) {
    case kUnknown: return "<unk>";
    case kSentenceStart: return "<s>";
    case kSentenceEnd: return "</s>";
    case kPad: return "<pad>";
  }
  throw Error("reserved_name: bad index " + std::to_string(index));
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::int64_t top_k) {
  if (corpus.empty()) throw Error("build_vocab: empty corpus");
  if (top_k < 1) throw Error("build_vocab: top_k must be >= 1");

  std::map<std::string, std::int64_t> freq;
  for (const auto& sentence : corpus)
    for (const std::string& tok : sentence) ++freq[tok];

  std::vector<std::string> tokens;
  for (int r = 0; r < kReservedCount; ++r) tokens.push_back(reserved_name(r));
  for (int r = 0; r < kReservedCount; ++r) freq.erase(reserved_name(r));

  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(top_k); ++i) {
    tokens.push_back(ranked[i].first);
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedCount) throw Error("vocabulary: missing reserved tokens");
  for (int r = 0; r < kReservedCount; ++r) {
    if (tokens[static_cast<std::size_t>(r)] != reserved_name(r)) {
      throw Error("vocabulary: reserved token " + std::to_string(r) + " must be " +
                  std::string(reserved_name(r)));
    }
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    v.index_.emplace_back(v.tokens_[i], static_cast<int>(i));
  }
  std::sort(v.index_.begin(), v.index_.end());
  for (std::size_t i = 1; i < v.index_.size(); ++i) {
    if (v.index_[i].first == v.index_[i - 1].first) {
      throw Error("vocabulary: duplicate token '" + v.index_[i].first + "'");
    }
  }
  return v;
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || index >= size()) {
    throw Error("vocabulary: index " + std::to_string(index) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

int Vocabulary::index(const std::string& token) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), token,
                             [](const auto& entry, const std::string& t) {
                               return entry.first < t;
                             });
  if (it != index_.end() && it->first == token) return it->second;
  return kUnknown;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(index(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& indices) const {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(token(i));
  return out;
}

std::vector<std::vector<std::string>> load_corpus_file(const std::string& path,
                                                       TokenLevel level) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> toks = tokenize(line, level);
    if (!toks.empty()) corpus.push_back(std::move(toks));
  }
  if (corpus.empty()) throw Error("empty corpus: " + path);
  return corpus;
}

Tensor encode_one_hot(const std::vector<int>& sentence, const Vocabulary& vocab,
                      std::int64_t length) {
  if (length <= 0) throw Error("encode_one_hot: length must be positive");
  Tensor out({length, vocab.size()});
  for (std::int64_t t = 0; t < length; ++t) {
    int id = Vocabulary::kPad;
    if (t < static_cast<std::int64_t>(sentence.size())) {
      id = sentence[static_cast<std::size_t>(t)];
      if (id < 0 || id >= vocab.size()) {
        throw Error("encode_one_hot: token index " + std::to_string(id) + " out of range");
      }
    }
    out.at2(t, id) = 1.0;
  }
  return out;
}

Tensor encode_one_hot_batch(const std::vector<std::vector<int>>& sentences,
                            const Vocabulary& vocab, std::int64_t length) {
  if (sentences.empty()) throw Error("encode_one_hot_batch: empty batch");
  Tensor out({static_cast<std::int64_t>(sentences.size()), length, vocab.size()});
  for (std::size_t b = 0; b < sentences.size(); ++b) {
    const Tensor row = encode_one_hot(sentences[b], vocab, length);
    for (std::int64_t t = 0; t < length; ++t)
      for (std::int64_t k = 0; k < vocab.size(); ++k)
        out.at3(static_cast<std::int64_t>(b), t, k) = row.at2(t, k);
  }
  return out;
}

std::vector<int> decode_one_hot(const Tensor& matrix) {
  if (matrix.rank() != 2) {
    throw Error("decode_one_hot: expected (n, k), got " + shape_str(matrix.shape()));
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(matrix.extent(0)));
  for (std::int64_t t = 0; t < matrix.extent(0); ++t) {
    std::int64_t best = 0;
    for (std::int64_t k = 1; k < matrix.extent(1); ++k) {
      if (matrix.at2(t, k) > matrix.at2(t, best)) best = k;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

LabeledCorpus label_attribute(std::vector<std::vector<std::string>> corpus, AttributeRule rule,
                              const std::string& sentiment_path) {
  LabeledCorpus out;
  out.sentences = std::move(corpus);
  out.labels.reserve(out.sentences.size());
  if (rule == AttributeRule::kQuestion) {
    for (const auto& sentence : out.sentences) {
      const bool question =
          std::find(sentence.begin(), sentence.end(), "?") != sentence.end();
      out.labels.push_back(question ? 1 : 0);
    }
    return out;
  }
  std::ifstream in(sentiment_path);
  if (!in) throw Error("cannot open sentiment label file: " + sentiment_path);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    std::string tok;
    if (!(is >> tok)) continue;
    if (tok != "0" && tok != "1") {
      throw Error("sentiment label file: expected 0 or 1, got '" + tok + "'");
    }
    out.labels.push_back(tok == "1" ? 1 : 0);
  }
  if (out.labels.size() != out.sentences.size()) {
    throw Error("sentiment label file has " + std::to_string(out.labels.size()) +
                " labels for " + std::to_string(out.sentences.size()) + " sentences");
  }
  return out;
}

CurriculumState curriculum_advance(CurriculumState state, std::int64_t epoch) {
  if (epoch < 0) throw Error("curriculum_advance: negative epoch");
  if (state.epochs_per_increment < 1) {
    throw Error("curriculum_advance: epochs_per_increment must be >= 1");
  }
  state.current_length =
      std::min(state.max_length, state.start_length + epoch / state.epochs_per_increment);
  return state;
}

}  // namespace advseq::data
