#include "dgwm/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgwm/errors.hpp"

namespace dgwm {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

long long parse_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw ParameterError(key + ": expected integer, got '" + value + "'");
  }
  if (pos != value.size()) {
    throw ParameterError(key + ": expected integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ParameterError(key + ": expected real, got '" + value + "'");
  }
  if (pos != value.size()) {
    throw ParameterError(key + ": expected real, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParameterError(key + ": expected true/false, got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw ParameterError(key + ": expected unsigned integer, got '" + value +
                         "'");
  }
  if (pos != value.size()) {
    throw ParameterError(key + ": expected unsigned integer, got '" + value +
                         "'");
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& value) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(value);
  while (std::getline(ss, cur, ',')) parts.push_back(cur);
  return parts;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  // data generation
  if (key == "shift_kind") {
    shift.shift_kind = parse_shift_kind(value);
  } else if (key == "num_domains") {
    shift.num_domains = static_cast<int>(parse_int(key, value));
  } else if (key == "num_classes") {
    shift.num_classes = static_cast<int>(parse_int(key, value));
  } else if (key == "input_dim") {
    shift.input_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "samples_per_class_per_domain") {
    shift.samples_per_class_per_domain =
        static_cast<int>(parse_int(key, value));
  } else if (key == "shift_strength") {
    shift.shift_strength = parse_real(key, value);
  } else if (key == "data_seed") {
    shift.seed = parse_u64(key, value);
  } else if (key == "class_frequencies") {
    shift.class_frequencies.clear();
    if (!value.empty()) {
      for (const std::string& p : split_csv(value)) {
        shift.class_frequencies.push_back(parse_real(key, p));
      }
    }
  } else if (key == "dataset") {
    dataset_path = value;
    // split plan
  } else if (key == "setting") {
    plan.setting = parse_split_setting(value);
  } else if (key == "labels_per_class") {
    plan.labels_per_class = static_cast<int>(parse_int(key, value));
  } else if (key == "labeled_domain") {
    plan.labeled_domain = static_cast<int>(parse_int(key, value));
  } else if (key == "target_domain") {
    plan.target_domain = static_cast<int>(parse_int(key, value));
  } else if (key == "source_domains") {
    plan.source_domains.clear();
    if (!value.empty()) {
      for (const std::string& p : split_csv(value)) {
        plan.source_domains.push_back(static_cast<int>(parse_int(key, p)));
      }
    }
  } else if (key == "split_seed") {
    plan.split_seed = parse_u64(key, value);
    // training
  } else if (key == "epochs") {
    train.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "steps_per_epoch") {
    train.steps_per_epoch = static_cast<int>(parse_int(key, value));
  } else if (key == "labeled_batch") {
    train.labeled_batch = static_cast<int>(parse_int(key, value));
  } else if (key == "unlabeled_batch") {
    train.unlabeled_batch = static_cast<int>(parse_int(key, value));
  } else if (key == "tau") {
    train.tau = parse_real(key, value);
  } else if (key == "baseline") {
    train.baseline = parse_baseline(value);
  } else if (key == "entmin_weight") {
    train.entmin_weight = parse_real(key, value);
  } else if (key == "modulation") {
    train.modulation = parse_bool(key, value);
  } else if (key == "update_per_domain") {
    train.update_per_domain = parse_bool(key, value);
  } else if (key == "seed") {
    train.seed = parse_u64(key, value);
  } else if (key == "lr_backbone") {
    train.sgd.lr_backbone = parse_real(key, value);
  } else if (key == "lr_head") {
    train.sgd.lr_head = parse_real(key, value);
  } else if (key == "momentum") {
    train.sgd.momentum = parse_real(key, value);
    // model
  } else if (key == "feature_dim") {
    model.feature_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "latent_dim") {
    model.latent_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "hidden") {
    model.hidden.clear();
    if (!value.empty()) {
      for (const std::string& p : split_csv(value)) {
        model.hidden.push_back(static_cast<int>(parse_int(key, p)));
      }
    }
  } else if (key == "epsilon_sq") {
    model.epsilon_sq = parse_real(key, value);
  } else if (key == "noise_mode") {
    model.noise_mode = parse_noise_mode(value);
  } else if (key == "aggregation") {
    model.aggregation = parse_aggregation(value);
  } else if (key == "detach_domain_info") {
    model.detach_domain_info = parse_bool(key, value);
  } else if (key == "mask_variant") {
    model.mask_variant = parse_mask_variant(value);
  } else if (key == "separate_classifiers") {
    model.separate_classifiers = parse_bool(key, value);
    // orchestration
  } else if (key == "trials") {
    trials = static_cast<int>(parse_int(key, value));
  } else if (key == "output_dir") {
    output_dir = value;
  } else {
    throw ParameterError("unknown config key: " + key);
  }
}

void ExperimentConfig::validate() const {
  shift.validate();
  train.validate();
  model.validate();
  if (trials < 1) throw ParameterError("trials must be >= 1");
  if (plan.target_domain < 0 ||
      plan.target_domain >= shift.num_domains) {
    if (dataset_path.empty()) {
      throw ParameterError("target_domain outside the generated domain range");
    }
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "shift_kind=" << to_string(shift.shift_kind) << "\n";
  out << "num_domains=" << shift.num_domains << "\n";
  out << "num_classes=" << shift.num_classes << "\n";
  out << "input_dim=" << shift.input_dim << "\n";
  out << "samples_per_class_per_domain=" << shift.samples_per_class_per_domain
      << "\n";
  out << "shift_strength=" << format_double(shift.shift_strength) << "\n";
  out << "data_seed=" << shift.seed << "\n";
  out << "class_frequencies=" << join_reals(shift.class_frequencies) << "\n";
  out << "dataset=" << dataset_path << "\n";
  out << "setting=" << to_string(plan.setting) << "\n";
  out << "labels_per_class=" << plan.labels_per_class << "\n";
  out << "labeled_domain=" << plan.labeled_domain << "\n";
  out << "target_domain=" << plan.target_domain << "\n";
  out << "source_domains=" << join_ints(plan.source_domains) << "\n";
  out << "split_seed=" << plan.split_seed << "\n";
  out << "epochs=" << train.epochs << "\n";
  out << "steps_per_epoch=" << train.steps_per_epoch << "\n";
  out << "labeled_batch=" << train.labeled_batch << "\n";
  out << "unlabeled_batch=" << train.unlabeled_batch << "\n";
  out << "tau=" << format_double(train.tau) << "\n";
  out << "baseline=" << to_string(train.baseline) << "\n";
  out << "entmin_weight=" << format_double(train.entmin_weight) << "\n";
  out << "modulation=" << (train.modulation ? "true" : "false") << "\n";
  out << "update_per_domain=" << (train.update_per_domain ? "true" : "false")
      << "\n";
  out << "seed=" << train.seed << "\n";
  out << "lr_backbone=" << format_double(train.sgd.lr_backbone) << "\n";
  out << "lr_head=" << format_double(train.sgd.lr_head) << "\n";
  out << "momentum=" << format_double(train.sgd.momentum) << "\n";
  out << "feature_dim=" << model.feature_dim << "\n";
  out << "latent_dim=" << model.latent_dim << "\n";
  out << "hidden=" << join_ints(model.hidden) << "\n";
  out << "epsilon_sq=" << format_double(model.epsilon_sq) << "\n";
  out << "noise_mode=" << to_string(model.noise_mode) << "\n";
  out << "aggregation=" << to_string(model.aggregation) << "\n";
  out << "detach_domain_info=" << (model.detach_domain_info ? "true" : "false")
      << "\n";
  out << "mask_variant=" << to_string(model.mask_variant) << "\n";
  out << "separate_classifiers="
      << (model.separate_classifiers ? "true" : "false") << "\n";
  out << "trials=" << trials << "\n";
  out << "output_dir=" << output_dir << "\n";
  return out.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
  const std::string text = canonical_text();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void parse_config_text(const std::string& text, ExperimentConfig& cfg,
                       const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // trim
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t\r");
    std::string t = line.substr(b, e - b + 1);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(origin + ":" + std::to_string(lineno) +
                           ": expected key=value, got '" + t + "'");
    }
    std::string key = t.substr(0, eq);
    std::string value = t.substr(eq + 1);
    std::size_t ke = key.find_last_not_of(" \t");
    key = ke == std::string::npos ? "" : key.substr(0, ke + 1);
    std::size_t vb = value.find_first_not_of(" \t");
    value = vb == std::string::npos ? "" : value.substr(vb);
    try {
      cfg.set(key, value);
    } catch (const ParameterError& err) {
      throw ParameterError(origin + ":" + std::to_string(lineno) + ": " +
                           err.what());
    }
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg;
  parse_config_text(buf.str(), cfg, path);
  cfg.validate();
  return cfg;
}

}  // namespace dgwm
