#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "advseq/tensor.hpp"

namespace advseq::train {

/// Single-file container of named parameter arrays plus string metadata,
/// with a format-version header. Save/load round-trips are bit-exact.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> metadata;

  void add_array(const std::string& name, ad::Tensor tensor);
  const ad::Tensor* find_array(const std::string& name) const;
  const ad::Tensor& array(const std::string& name) const;  // throws when absent
  const std::vector<std::pair<std::string, ad::Tensor>>& arrays() const { return arrays_; }

  const std::string& meta(const std::string& key) const;  // throws when absent

  /// Writes to a temporary file and renames, so failures never leave a
  /// partial checkpoint behind.
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, ad::Tensor>> arrays_;
};

}  // namespace advseq::train
