// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "qpo/fingerprints.hpp"
#include "qpo/loop.hpp"

namespace qpo {

/// Where the candidate pool comes from: a delimited file or a generator.
struct DatasetSpec {
  std::optional<std::string> path;
  PoolSchema schema;
  std::optional<SyntheticSpec> synthetic;
};

/// Everything needed to reproduce a sweep.
///
/// Parsed from an INI-style file with sections [campaign], [policy],
/// [surrogate], [dataset] and [run]; unknown sections or keys are rejected
/// with the offending name. Command-line flags override file values.
struct RunManifest {
  std::string config_path;
  DatasetSpec dataset;
  std::string out_dir = "results";
  std::vector<std::uint64_t> seeds = {0};
  std::vector<PolicyKind> policies = {PolicyKind::qpo};
  CampaignConfig campaign;
  unsigned threads = 1;

  /// Throws UsageError naming the bad field.
  void validate() const;
};

RunManifest parse_manifest(std::istream& in, const std::string& origin = "<config>");
RunManifest load_manifest(const std::string& path);

/// "0,1,2" or "0-9" style seed lists.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<PolicyKind> parse_policy_list(const std::string& text);

CandidatePool load_dataset(const DatasetSpec& spec);

}  // namespace qpo
