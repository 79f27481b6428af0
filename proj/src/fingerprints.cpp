// SPDX-License-Identifier: Apache-2.0
#include "qpo/fingerprints.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qpo/errors.hpp"
#include "qpo/parallel.hpp"

namespace qpo {

CountFingerprint::CountFingerprint(std::vector<Entry> entries, std::uint32_t dimension)
    : entries_(std::move(entries)), dimension_(dimension) {
  if (dimension_ == 0) throw UsageError("fingerprint dimension must be positive");
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.index < b.index; });
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& e = entries_[k];
    if (e.index >= dimension_)
      throw UsageError("fingerprint index " + std::to_string(e.index) + " out of range for dimension " +
                       std::to_string(dimension_));
    if (e.count == 0) throw UsageError("fingerprint count must be >= 1");
    if (k > 0 && entries_[k - 1].index == e.index)
      throw UsageError("fingerprint index " + std::to_string(e.index) + " repeated");
    sum_ += e.count;
    sum_squares_ += static_cast<double>(e.count) * e.count;
  }
}

CountFingerprint CountFingerprint::from_dense(std::span<const std::int64_t> counts) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw UsageError("negative count at position " + std::to_string(i));
    if (counts[i] > 0)
      entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(counts[i])});
  }
  return CountFingerprint(std::move(entries), static_cast<std::uint32_t>(counts.size()));
}

double tanimoto(const CountFingerprint& a, const CountFingerprint& b, TanimotoForm form) {
  if (a.dimension() != b.dimension())
    throw UsageError("tanimoto: dimension mismatch (" + std::to_string(a.dimension()) + " vs " +
                     std::to_string(b.dimension()) + ")");
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;

  // Merge over the sorted supports; only the intersection contributes.
  double shared_min = 0.0;
  double shared_dot = 0.0;
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  while (ia != a.entries().end() && ib != b.entries().end()) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      shared_min += std::min(ia->count, ib->count);
      shared_dot += static_cast<double>(ia->count) * ib->count;
      ++ia;
      ++ib;
    }
  }
  if (form == TanimotoForm::min_max) {
    // sum(max) = sum(a) + sum(b) - sum(min)
    return shared_min / (a.sum() + b.sum() - shared_min);
  }
  return shared_dot / (a.sum_squares() + b.sum_squares() - shared_dot);
}

CandidatePool::CandidatePool(std::vector<CountFingerprint> candidates, std::vector<std::string> ids,
                             std::optional<std::vector<double>> oracle_values)
    : candidates_(std::move(candidates)), ids_(std::move(ids)), oracle_(std::move(oracle_values)) {
  if (!candidates_.empty()) dimension_ = candidates_.front().dimension();
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (candidates_[i].dimension() != dimension_)
      throw UsageError("candidate " + std::to_string(i) + " has dimension " +
                       std::to_string(candidates_[i].dimension()) + ", expected " + std::to_string(dimension_));
  }
  if (!ids_.empty() && ids_.size() != candidates_.size())
    throw UsageError("id count does not match candidate count");
  if (oracle_) {
    if (oracle_->size() != candidates_.size())
      throw UsageError("oracle value count does not match candidate count");
    for (std::size_t i = 0; i < oracle_->size(); ++i) {
      if (!std::isfinite((*oracle_)[i]))
        throw UsageError("oracle value for candidate " + std::to_string(i) + " is not finite");
    }
  }
}

std::string CandidatePool::id(std::size_t i) const {
  if (i >= candidates_.size()) throw UsageError("candidate index " + std::to_string(i) + " out of range");
  return ids_.empty() ? std::to_string(i) : ids_[i];
}

const std::vector<double>& CandidatePool::oracle_values() const {
  if (!oracle_) throw DataError("pool has no oracle values");
  return *oracle_;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

CountFingerprint parse_sparse_tokens(const std::string& field, std::uint32_t dimension) {
  std::vector<CountFingerprint::Entry> entries;
  std::istringstream tokens(field);
  std::string token;
  while (tokens >> token) {
    const auto colon = token.find(':');
    if (colon == std::string::npos) throw UsageError("malformed token '" + token + "' (expected index:count)");
    std::int64_t index = 0;
    std::int64_t count = 0;
    const std::string_view tv(token);
    if (!parse_number(tv.substr(0, colon), index) || !parse_number(tv.substr(colon + 1), count))
      throw UsageError("malformed token '" + token + "'");
    if (count < 1) throw UsageError("token '" + token + "' has count < 1");
    if (index < 0 || index >= static_cast<std::int64_t>(dimension))
      throw UsageError("token '" + token + "' index out of range for dimension " + std::to_string(dimension));
    entries.push_back({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(count)});
  }
  return CountFingerprint(std::move(entries), dimension);
}

std::string format_sparse_tokens(const CountFingerprint& fp) {
  std::string out;
  for (const auto& e : fp.entries()) {
    if (!out.empty()) out += ' ';
    out += std::to_string(e.index);
    out += ':';
    out += std::to_string(e.count);
  }
  return out;
}

CandidatePool load_pool(std::istream& in, const PoolSchema& schema) {
  if (schema.dimension == 0) throw UsageError("pool schema dimension must be positive");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header_line = line;
      header = split(header_line, schema.delimiter);
      break;
    }
  }
  if (header.empty()) return {};

  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column(schema.id_column);
  const auto sparse_col = column(schema.sparse_column);
  const auto dense_col = column(schema.dense_column);
  const auto obj_col = column(schema.objective_column);
  if (sparse_col.has_value() == dense_col.has_value())
    throw ParseError(line_no, "header must name exactly one of '" + schema.sparse_column + "' or '" +
                                  schema.dense_column + "'");

  // A dense fingerprint occupies `dimension` physical fields starting at its
  // header position; later columns shift right accordingly.
  const std::size_t span = dense_col ? schema.dimension : 1;
  const std::size_t fp_col = dense_col ? *dense_col : *sparse_col;
  auto physical = [&](std::size_t logical) { return logical > fp_col ? logical + span - 1 : logical; };
  const std::size_t expected_fields = header.size() + span - 1;

  std::vector<CountFingerprint> fps;
  std::vector<std::string> ids;
  std::vector<double> objective;
  std::vector<std::int64_t> dense(dense_col ? schema.dimension : 0);

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, schema.delimiter);
    if (fields.size() != expected_fields)
      throw ParseError(line_no, "expected " + std::to_string(expected_fields) + " fields, found " +
                                    std::to_string(fields.size()));
    try {
      if (dense_col) {
        for (std::size_t k = 0; k < schema.dimension; ++k) {
          if (!parse_number(fields[fp_col + k], dense[k]))
            throw UsageError("malformed dense count '" + std::string(fields[fp_col + k]) + "'");
        }
        fps.push_back(CountFingerprint::from_dense(dense));
      } else {
        fps.push_back(parse_sparse_tokens(std::string(fields[fp_col]), schema.dimension));
      }
    } catch (const UsageError& e) {
      throw ParseError(line_no, e.what());
    }
    if (id_col) ids.emplace_back(fields[physical(*id_col)]);
    if (obj_col) {
      double v = 0.0;
      const auto text = fields[physical(*obj_col)];
      if (!parse_number(text, v) || !std::isfinite(v))
        throw ParseError(line_no, "objective '" + std::string(text) + "' is not a finite real");
      objective.push_back(v);
    }
  }
  std::optional<std::vector<double>> oracle;
  if (obj_col) oracle = std::move(objective);
  return CandidatePool(std::move(fps), std::move(ids), std::move(oracle));
}

CandidatePool load_pool_file(const std::string& path, const PoolSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pool file '" + path + "'");
  return load_pool(in, schema);
}

void write_pool(std::ostream& out, const CandidatePool& pool, char delimiter) {
  out << "id" << delimiter << "fingerprint";
  if (pool.has_oracle()) out << delimiter << "objective";
  out << '\n';
  std::ostringstream num;
  num.precision(17);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    out << pool.id(i) << delimiter << format_sparse_tokens(pool.fingerprint(i));
    if (pool.has_oracle()) {
      num.str({});
      num << pool.oracle_values()[i];
      out << delimiter << num.str();
    }
    out << '\n';
  }
}

Eigen::MatrixXd pairwise_tanimoto(const CandidatePool& pool, std::span<const std::size_t> subset,
                                  TanimotoForm form, unsigned threads) {
  for (auto i : subset) {
    if (i >= pool.size()) throw UsageError("candidate index " + std::to_string(i) + " out of range");
  }
  const auto n = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd out(n, n);
  parallel_for(subset.size(), threads, [&](std::size_t r) {
    const auto row = static_cast<Eigen::Index>(r);
    const auto& a = pool.fingerprint(subset[r]);
    for (Eigen::Index c = row; c < n; ++c) out(row, c) = tanimoto(a, pool.fingerprint(subset[c]), form);
  });
  for (Eigen::Index r = 1; r < n; ++r)
    for (Eigen::Index c = 0; c < r; ++c) out(r, c) = out(c, r);
  return out;
}

Eigen::MatrixXd cross_tanimoto(const CandidatePool& pool, std::span<const std::size_t> rows,
                               std::span<const std::size_t> cols, TanimotoForm form, unsigned threads) {
  for (auto i : rows)
    if (i >= pool.size()) throw UsageError("candidate index " + std::to_string(i) + " out of range");
  for (auto i : cols)
    if (i >= pool.size()) throw UsageError("candidate index " + std::to_string(i) + " out of range");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  parallel_for(rows.size(), threads, [&](std::size_t r) {
    const auto& a = pool.fingerprint(rows[r]);
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = tanimoto(a, pool.fingerprint(cols[c]), form);
  });
  return out;
}

}  // namespace qpo
