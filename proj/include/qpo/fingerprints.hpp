// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qpo {

/// Sparse nonnegative integer feature vector (substructure counts).
///
/// Entries are kept sorted by index with strictly positive counts; zero
/// counts are never stored. Sums used by the similarity kernels are cached at
/// construction.
class CountFingerprint {
 public:
  struct Entry {
    std::uint32_t index;
    std::uint32_t count;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  CountFingerprint() = default;

  /// Validates and sorts `entries`. Throws UsageError on index >= dimension,
  /// zero count, or a repeated index.
  CountFingerprint(std::vector<Entry> entries, std::uint32_t dimension);

  /// Builds from a dense count vector, dropping zeros.
  static CountFingerprint from_dense(std::span<const std::int64_t> counts);

  std::uint32_t dimension() const noexcept { return dimension_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  double sum() const noexcept { return sum_; }
  double sum_squares() const noexcept { return sum_squares_; }

  friend bool operator==(const CountFingerprint& a, const CountFingerprint& b) {
    return a.dimension_ == b.dimension_ && a.entries_ == b.entries_;
  }

 private:
  std::vector<Entry> entries_;
  std::uint32_t dimension_ = 0;
  double sum_ = 0.0;
  double sum_squares_ = 0.0;
};

/// Count generalizations of Tanimoto similarity.
enum class TanimotoForm {
  min_max,  ///< sum(min(a,b)) / sum(max(a,b))
  dot,      ///< a.b / (a.a + b.b - a.b)
};

/// Tanimoto similarity in [0, 1]. Two empty vectors are identical (1); an
/// empty vector against a nonempty one gives 0. Throws UsageError when the
/// dimensions differ.
double tanimoto(const CountFingerprint& a, const CountFingerprint& b,
                TanimotoForm form = TanimotoForm::min_max);

/// Fixed discrete design space: fingerprints plus optional ids and oracle values.
class CandidatePool {
 public:
  CandidatePool() = default;

  /// Throws UsageError when dimensions are mixed, ids/oracle lengths disagree
  /// with the candidate count, or an oracle value is not finite.
  CandidatePool(std::vector<CountFingerprint> candidates, std::vector<std::string> ids = {},
                std::optional<std::vector<double>> oracle_values = std::nullopt);

  std::size_t size() const noexcept { return candidates_.size(); }
  bool empty() const noexcept { return candidates_.empty(); }
  std::uint32_t dimension() const noexcept { return dimension_; }

  const CountFingerprint& fingerprint(std::size_t i) const { return candidates_.at(i); }
  const std::vector<CountFingerprint>& fingerprints() const noexcept { return candidates_; }

  bool has_ids() const noexcept { return !ids_.empty(); }
  /// Stored id, or the decimal row index when the pool carries no ids.
  std::string id(std::size_t i) const;

  bool has_oracle() const noexcept { return oracle_.has_value(); }
  const std::vector<double>& oracle_values() const;

 private:
  std::vector<CountFingerprint> candidates_;
  std::vector<std::string> ids_;
  std::optional<std::vector<double>> oracle_;
  std::uint32_t dimension_ = 0;
};

/// Column mapping for delimited pool files.
///
/// The header row names the columns. Exactly one of `sparse_column` (a field
/// of space-separated "index:count" tokens) or `dense_column` (which spans
/// `dimension` consecutive delimited integer fields) must be present; the id
/// and objective columns are optional and any other column is ignored.
struct PoolSchema {
  std::uint32_t dimension = 2048;
  char delimiter = ',';
  std::string id_column = "id";
  std::string sparse_column = "fingerprint";
  std::string dense_column = "dense";
  std::string objective_column = "objective";
};

/// Parses a delimited pool. Row order defines candidate indexing. An empty
/// stream yields an empty pool. Throws ParseError naming the 1-based line.
CandidatePool load_pool(std::istream& in, const PoolSchema& schema);
CandidatePool load_pool_file(const std::string& path, const PoolSchema& schema);

/// Writes `pool` in the sparse layout accepted by load_pool.
void write_pool(std::ostream& out, const CandidatePool& pool, char delimiter = ',');

/// Symmetric similarity matrix over `subset`. Rows are computed in parallel
/// with identical output for any thread count.
Eigen::MatrixXd pairwise_tanimoto(const CandidatePool& pool, std::span<const std::size_t> subset,
                                  TanimotoForm form = TanimotoForm::min_max, unsigned threads = 1);

/// Rectangular similarity block between two index sets.
Eigen::MatrixXd cross_tanimoto(const CandidatePool& pool, std::span<const std::size_t> rows,
                               std::span<const std::size_t> cols,
                               TanimotoForm form = TanimotoForm::min_max, unsigned threads = 1);

/// Parses "index:count index:count ..." into a fingerprint; throws UsageError
/// with a description of the offending token.
CountFingerprint parse_sparse_tokens(const std::string& field, std::uint32_t dimension);

/// Inverse of parse_sparse_tokens.
std::string format_sparse_tokens(const CountFingerprint& fp);

}  // namespace qpo
