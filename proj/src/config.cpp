// SPDX-License-Identifier: Apache-2.0
#include "qpo/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qpo/errors.hpp"

namespace qpo {

namespace {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
T convert(const std::string& field, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof()) throw UsageError("config field '" + field + "': cannot parse '" + text + "'");
  return value;
}

bool convert_bool(const std::string& field, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw UsageError("config field '" + field + "': expected a boolean, got '" + text + "'");
}

// Walks a parsed tree, rejecting keys not in the accepted set.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  void check_known(const std::map<std::string, std::set<std::string>>& accepted) const {
    for (const auto& [section, body] : tree_) {
      const auto it = accepted.find(section);
      if (it == accepted.end()) throw UsageError("config: unknown section [" + section + "]");
      for (const auto& [key, _] : body)
        if (!it->second.count(key)) throw UsageError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return *v;
  }

 private:
  const pt::ptree& tree_;
};

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-', 1);
    if (dash != std::string::npos) {
      const auto lo = convert<std::uint64_t>("seeds", item.substr(0, dash));
      const auto hi = convert<std::uint64_t>("seeds", item.substr(dash + 1));
      if (hi < lo) throw UsageError("config field 'seeds': empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(convert<std::uint64_t>("seeds", item));
    }
  }
  if (seeds.empty()) throw UsageError("config field 'seeds': seed list is empty");
  return seeds;
}

std::vector<PolicyKind> parse_policy_list(const std::string& text) {
  std::vector<PolicyKind> out;
  for (const auto& item : split_list(text)) out.push_back(parse_policy(item));
  if (out.empty()) throw UsageError("config field 'policies': policy list is empty");
  return out;
}

RunManifest parse_manifest(std::istream& in, const std::string& origin) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError("config " + origin + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  const Reader r(tree);
  r.check_known({
      {"campaign", {"init_batch", "batch_size", "iterations", "direction", "top_k", "top_fractions"}},
      {"policy",
       {"policies", "mc_samples", "beta_ucb", "beta_bucb", "prefilter_size", "prefilter_metric"}},
      {"surrogate", {"tanimoto", "predictive_noise", "restarts"}},
      {"dataset",
       {"path", "dimension", "delimiter", "id_column", "fingerprint_column", "dense_column", "objective_column",
        "generator", "size", "seed", "families", "weight_density", "motifs"}},
      {"run", {"seeds", "out", "threads"}},
  });

  RunManifest m;
  m.config_path = origin;
  auto& c = m.campaign;
  if (auto v = r.get("campaign", "init_batch")) c.init_batch = convert<std::size_t>("campaign.init_batch", *v);
  if (auto v = r.get("campaign", "batch_size")) c.batch_size = convert<std::size_t>("campaign.batch_size", *v);
  if (auto v = r.get("campaign", "iterations")) c.iterations = convert<std::size_t>("campaign.iterations", *v);
  if (auto v = r.get("campaign", "direction")) c.direction = parse_direction(*v);
  if (auto v = r.get("campaign", "top_k")) {
    c.top_k.clear();
    for (const auto& k : split_list(*v)) c.top_k.push_back(convert<std::size_t>("campaign.top_k", k));
  }
  if (auto v = r.get("campaign", "top_fractions")) {
    c.top_fractions.clear();
    for (const auto& p : split_list(*v)) {
      const auto f = convert<double>("campaign.top_fractions", p);
      if (!(f > 0.0 && f <= 1.0)) throw UsageError("config field 'campaign.top_fractions': " + p + " not in (0, 1]");
      c.top_fractions.push_back(f);
    }
  }

  auto& p = c.policy;
  if (auto v = r.get("policy", "policies")) m.policies = parse_policy_list(*v);
  if (auto v = r.get("policy", "mc_samples")) p.mc_samples = convert<std::int64_t>("policy.mc_samples", *v);
  if (auto v = r.get("policy", "beta_ucb")) p.beta_ucb = convert<double>("policy.beta_ucb", *v);
  if (auto v = r.get("policy", "beta_bucb")) p.beta_bucb = convert<double>("policy.beta_bucb", *v);
  if (auto v = r.get("policy", "prefilter_size")) p.prefilter_size = convert<std::size_t>("policy.prefilter_size", *v);
  if (auto v = r.get("policy", "prefilter_metric")) p.prefilter_metric = parse_prefilter_metric(*v);

  auto& s = c.surrogate;
  if (auto v = r.get("surrogate", "tanimoto")) {
    if (*v == "min-max") s.form = TanimotoForm::min_max;
    else if (*v == "dot") s.form = TanimotoForm::dot;
    else throw UsageError("config field 'surrogate.tanimoto': expected min-max or dot, got '" + *v + "'");
  }
  if (auto v = r.get("surrogate", "predictive_noise")) s.predictive_noise = convert_bool("surrogate.predictive_noise", *v);
  if (auto v = r.get("surrogate", "restarts")) s.restarts = convert<int>("surrogate.restarts", *v);

  auto& d = m.dataset;
  if (auto v = r.get("dataset", "path")) d.path = *v;
  if (auto v = r.get("dataset", "dimension")) d.schema.dimension = convert<std::uint32_t>("dataset.dimension", *v);
  if (auto v = r.get("dataset", "delimiter")) {
    if (*v == "tab" || *v == "\\t") d.schema.delimiter = '\t';
    else if (v->size() == 1) d.schema.delimiter = (*v)[0];
    else throw UsageError("config field 'dataset.delimiter': expected one character or 'tab'");
  }
  if (auto v = r.get("dataset", "id_column")) d.schema.id_column = *v;
  if (auto v = r.get("dataset", "fingerprint_column")) d.schema.sparse_column = *v;
  if (auto v = r.get("dataset", "dense_column")) d.schema.dense_column = *v;
  if (auto v = r.get("dataset", "objective_column")) d.schema.objective_column = *v;
  if (auto v = r.get("dataset", "generator")) {
    SyntheticSpec spec;
    spec.generator = parse_generator(*v);
    spec.dimension = d.schema.dimension;
    if (auto x = r.get("dataset", "size")) spec.size = convert<std::size_t>("dataset.size", *x);
    if (auto x = r.get("dataset", "seed")) spec.seed = convert<std::uint64_t>("dataset.seed", *x);
    if (auto x = r.get("dataset", "families")) spec.families = convert<std::size_t>("dataset.families", *x);
    if (auto x = r.get("dataset", "weight_density")) spec.weight_density = convert<double>("dataset.weight_density", *x);
    if (auto x = r.get("dataset", "motifs")) spec.motifs = convert<std::size_t>("dataset.motifs", *x);
    d.synthetic = spec;
  }

  if (auto v = r.get("run", "seeds")) m.seeds = parse_seed_list(*v);
  if (auto v = r.get("run", "out")) m.out_dir = *v;
  if (auto v = r.get("run", "threads")) m.threads = convert<unsigned>("run.threads", *v);
  return m;
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  return parse_manifest(in, path);
}

void RunManifest::validate() const {
  if (seeds.empty()) throw UsageError("manifest: seed list is empty");
  if (policies.empty()) throw UsageError("manifest: policy list is empty");
  if (dataset.path && dataset.synthetic)
    throw UsageError("manifest: dataset.path and dataset.generator are mutually exclusive");
  if (!dataset.path && !dataset.synthetic) throw UsageError("manifest: no dataset (set dataset.path or dataset.generator)");
  if (dataset.path && !std::filesystem::exists(*dataset.path))
    throw UsageError("manifest: dataset.path '" + *dataset.path + "' does not exist");
  if (campaign.init_batch == 0) throw UsageError("manifest: campaign.init_batch must be positive");
  if (campaign.batch_size == 0) throw UsageError("manifest: campaign.batch_size must be positive");
  if (campaign.surrogate.restarts < 1) throw UsageError("manifest: surrogate.restarts must be positive");
  campaign.policy.validate(campaign.batch_size);
}

CandidatePool load_dataset(const DatasetSpec& spec) {
  if (spec.synthetic) return synthetic_pool(*spec.synthetic);
  if (!spec.path) throw UsageError("dataset: no path or generator");
  return load_pool_file(*spec.path, spec.schema);
}

}  // namespace qpo
