#include "dgwm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dgwm/errors.hpp"

namespace dgwm {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Heavy-tailed draw: Student-t with 2 degrees of freedom, capped so a single
// unlucky draw cannot blow up downstream statistics.
double student_t2(Rng& rng) {
  const double z = rng.normal();
  const double u = rng.uniform();
  const double denom = std::sqrt(-std::log(1.0 - u));  // chi2_2/2 = -ln(1-u)
  double t = denom > 0.0 ? z / denom : 0.0;
  return std::clamp(t, -50.0, 50.0);
}

int signal_dim(int input_dim) { return (input_dim + 1) / 2; }

}  // namespace

std::string to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::style: return "style";
    case ShiftKind::background: return "background";
    case ShiftKind::corruption: return "corruption";
  }
  return "style";
}

ShiftKind parse_shift_kind(const std::string& s) {
  if (s == "style") return ShiftKind::style;
  if (s == "background") return ShiftKind::background;
  if (s == "corruption") return ShiftKind::corruption;
  throw ParameterError("unknown shift_kind: " + s);
}

std::string to_string(SplitSetting s) {
  return s == SplitSetting::few_labels ? "few_labels" : "one_labeled_domain";
}

SplitSetting parse_split_setting(const std::string& s) {
  std::string t = s;
  for (char& c : t)
    if (c == '-') c = '_';  // accept the flag-style spelling too
  if (t == "few_labels") return SplitSetting::few_labels;
  if (t == "one_labeled_domain") return SplitSetting::one_labeled_domain;
  throw ParameterError("unknown setting: " + s);
}

void ShiftSpec::validate() const {
  if (num_domains < 2) {
    throw ParameterError("ShiftSpec: need at least 2 domains");
  }
  if (num_classes < 2) {
    throw ParameterError("ShiftSpec: need at least 2 classes");
  }
  if (input_dim < 2) throw ParameterError("ShiftSpec: input_dim must be >= 2");
  if (samples_per_class_per_domain < 1) {
    throw ParameterError("ShiftSpec: samples_per_class_per_domain must be >= 1");
  }
  if (shift_strength < 0.0) {
    throw ParameterError("ShiftSpec: shift_strength must be >= 0");
  }
  if (!class_frequencies.empty()) {
    if (static_cast<int>(class_frequencies.size()) != num_classes) {
      throw ParameterError("ShiftSpec: class_frequencies size mismatch");
    }
    for (double f : class_frequencies) {
      if (f <= 0.0) {
        throw ParameterError("ShiftSpec: class frequencies must be > 0");
      }
    }
  }
}

MultiDomainDataset generate(const ShiftSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int D = spec.input_dim;
  const int C = spec.num_classes;
  const int d_sig = signal_dim(D);
  const int n_pairs = D / 2;

  // Shared class cores on the signal block. The scale keeps classes close
  // enough to overlap: in-domain accuracy should sit well below 1 so that
  // shift-induced degradation has somewhere to show up.
  constexpr double kCoreScale = 1.0;
  // Class-independent carrier added to every sample. Domain transforms act
  // on it, so a domain leaves a signature in batch means (what the
  // domain-information vector aggregates) that is not drowned out by the
  // class mixture of the batch.
  constexpr double kCarrierScale = 1.0;
  std::vector<std::vector<double>> cores(C, std::vector<double>(D, 0.0));
  for (int c = 0; c < C; ++c) {
    for (int j = 0; j < d_sig; ++j) cores[c][j] = kCoreScale * rng.normal();
  }
  std::vector<double> carrier(D, 0.0);
  for (int j = 0; j < d_sig; ++j) carrier[j] = kCarrierScale * rng.normal();

  MultiDomainDataset ds;
  ds.spec = spec;
  ds.domains.resize(spec.num_domains);
  const double denom = std::max(1, spec.num_domains - 1);

  for (int k = 0; k < spec.num_domains; ++k) {
    ds.domain_names.push_back("domain_" + std::to_string(k));
    const double mag = spec.shift_strength * (k / denom);

    // Domain transform parameters are always drawn, so datasets for nearby
    // strengths differ only by magnitude, never by stream alignment.
    std::vector<double> angles(n_pairs, 0.0);
    for (int t = 0; t < n_pairs; ++t) angles[t] = 0.7 * mag * rng.normal();
    const double scale = 1.0 + 0.15 * mag * rng.uniform(-1.0, 1.0);
    std::vector<double> bias(D, 0.0);
    for (int j = d_sig; j < D; ++j) bias[j] = 1.0 * mag * rng.normal();
    const double severity = 0.4 * mag * rng.uniform(0.5, 1.5);

    for (int c = 0; c < C; ++c) {
      int count = spec.samples_per_class_per_domain;
      if (!spec.class_frequencies.empty()) {
        count = std::max(
            1, static_cast<int>(std::lround(count * spec.class_frequencies[c])));
      }
      for (int i = 0; i < count; ++i) {
        Sample s;
        s.label = c;
        s.x.resize(D);
        for (int j = 0; j < D; ++j) {
          s.x[j] = carrier[j] + cores[c][j] + rng.normal();
        }
        switch (spec.shift_kind) {
          case ShiftKind::style: {
            for (int t = 0; t < n_pairs; ++t) {
              const double cs = std::cos(angles[t]);
              const double sn = std::sin(angles[t]);
              const double a = s.x[2 * t];
              const double b = s.x[2 * t + 1];
              s.x[2 * t] = cs * a - sn * b;
              s.x[2 * t + 1] = sn * a + cs * b;
            }
            for (double& v : s.x) v *= scale;
            break;
          }
          case ShiftKind::background:
            for (int j = d_sig; j < D; ++j) s.x[j] += bias[j];
            break;
          case ShiftKind::corruption:
            for (int j = 0; j < d_sig; ++j) s.x[j] += severity * student_t2(rng);
            break;
        }
        ds.domains[k].push_back(std::move(s));
      }
    }
  }
  return ds;
}

void export_dataset_csv(const MultiDomainDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("dataset export: cannot open " + path);
  out << "domain,label";
  for (int j = 0; j < ds.input_dim(); ++j) out << ",x_" << j;
  out << "\n";
  for (int k = 0; k < ds.num_domains(); ++k) {
    for (const Sample& s : ds.domains[k]) {
      out << k << "," << s.label;
      for (double v : s.x) out << "," << format_double(v);
      out << "\n";
    }
  }
  if (!out) throw IoError("dataset export: write failed: " + path);

  nlohmann::json side;
  side["shift_kind"] = to_string(ds.spec.shift_kind);
  side["num_domains"] = ds.spec.num_domains;
  side["num_classes"] = ds.spec.num_classes;
  side["input_dim"] = ds.spec.input_dim;
  side["samples_per_class_per_domain"] = ds.spec.samples_per_class_per_domain;
  side["shift_strength"] = ds.spec.shift_strength;
  side["seed"] = ds.spec.seed;
  side["class_frequencies"] = ds.spec.class_frequencies;
  side["domain_names"] = ds.domain_names;
  std::ofstream sout(path + ".json");
  if (!sout) throw IoError("dataset export: cannot open sidecar");
  sout << side.dump(2) << "\n";
}

MultiDomainDataset import_dataset_csv(const std::string& path) {
  std::ifstream sin(path + ".json");
  if (!sin) throw IoError("dataset import: missing sidecar for " + path);
  nlohmann::json side = nlohmann::json::parse(sin);
  MultiDomainDataset ds;
  ds.spec.shift_kind = parse_shift_kind(side.at("shift_kind"));
  ds.spec.num_domains = side.at("num_domains");
  ds.spec.num_classes = side.at("num_classes");
  ds.spec.input_dim = side.at("input_dim");
  ds.spec.samples_per_class_per_domain =
      side.at("samples_per_class_per_domain");
  ds.spec.shift_strength = side.at("shift_strength");
  ds.spec.seed = side.at("seed");
  ds.spec.class_frequencies =
      side.at("class_frequencies").get<std::vector<double>>();
  ds.domain_names = side.at("domain_names").get<std::vector<std::string>>();
  ds.domains.resize(ds.spec.num_domains);

  std::ifstream in(path);
  if (!in) throw IoError("dataset import: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset import: empty file");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    Sample s;
    int domain = -1;
    int col = 0;
    while (std::getline(ls, tok, ',')) {
      if (col == 0) domain = std::stoi(tok);
      else if (col == 1) s.label = std::stoi(tok);
      else s.x.push_back(std::strtod(tok.c_str(), nullptr));
      ++col;
    }
    if (domain < 0 || domain >= ds.spec.num_domains ||
        static_cast<int>(s.x.size()) != ds.spec.input_dim) {
      throw IoError("dataset import: malformed row at line " +
                    std::to_string(lineno));
    }
    ds.domains[domain].push_back(std::move(s));
  }
  return ds;
}

TrainingView split(const MultiDomainDataset& ds, const SplitPlan& plan) {
  const int n_dom = ds.num_domains();
  if (plan.target_domain < 0 || plan.target_domain >= n_dom) {
    throw ParameterError("split: target_domain out of range");
  }
  std::vector<int> sources = plan.source_domains;
  if (sources.empty()) {
    for (int k = 0; k < n_dom; ++k) {
      if (k != plan.target_domain) sources.push_back(k);
    }
  }
  for (int s : sources) {
    if (s < 0 || s >= n_dom) throw ParameterError("split: source out of range");
    if (s == plan.target_domain) {
      throw ParameterError("split: target listed as source");
    }
  }
  if (plan.setting == SplitSetting::one_labeled_domain) {
    if (std::find(sources.begin(), sources.end(), plan.labeled_domain) ==
        sources.end()) {
      throw ParameterError("split: labeled_domain is not a source");
    }
  }

  TrainingView view;
  view.data = &ds;
  view.target_domain = plan.target_domain;
  Rng rng(plan.split_seed);
  for (int src : sources) {
    const auto& samples = ds.domains[src];
    DomainView dv;
    dv.domain_id = src;
    dv.unlabeled_indices.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      dv.unlabeled_indices[i] = static_cast<int>(i);
    }
    if (plan.setting == SplitSetting::one_labeled_domain) {
      if (src == plan.labeled_domain) dv.labeled_indices = dv.unlabeled_indices;
    } else {
      for (int c = 0; c < ds.num_classes(); ++c) {
        std::vector<int> of_class;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          if (samples[i].label == c) of_class.push_back(static_cast<int>(i));
        }
        if (plan.labels_per_class > static_cast<int>(of_class.size())) {
          throw ParameterError(
              "split: labels_per_class exceeds class population in domain " +
              std::to_string(src));
        }
        std::vector<int> picks = rng.sample_indices(
            static_cast<int>(of_class.size()), plan.labels_per_class);
        std::sort(picks.begin(), picks.end());
        for (int p : picks) dv.labeled_indices.push_back(of_class[p]);
      }
    }
    view.sources.push_back(std::move(dv));
  }
  return view;
}

std::vector<SplitPlan> leave_one_domain_out(const MultiDomainDataset& ds,
                                            const SplitPlan& proto) {
  if (ds.num_domains() < 2) {
    throw ParameterError("leave_one_domain_out: need at least 2 domains");
  }
  std::vector<SplitPlan> plans;
  for (int t = 0; t < ds.num_domains(); ++t) {
    SplitPlan p = proto;
    p.target_domain = t;
    p.source_domains.clear();
    for (int k = 0; k < ds.num_domains(); ++k) {
      if (k != t) p.source_domains.push_back(k);
    }
    if (p.setting == SplitSetting::one_labeled_domain &&
        std::find(p.source_domains.begin(), p.source_domains.end(),
                  p.labeled_domain) == p.source_domains.end()) {
      p.labeled_domain = p.source_domains.front();
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

std::vector<SplitPlan> adding_domain_plans(const MultiDomainDataset& ds,
                                           const SplitPlan& proto) {
  std::vector<int> sources = proto.source_domains;
  if (sources.empty()) {
    for (int k = 0; k < ds.num_domains(); ++k) {
      if (k != proto.target_domain) sources.push_back(k);
    }
  }
  if (sources.size() < 2) {
    throw ParameterError("adding_domain_plans: need at least 2 sources");
  }
  std::vector<SplitPlan> plans;
  for (std::size_t len = 1; len <= sources.size(); ++len) {
    SplitPlan p = proto;
    p.source_domains.assign(sources.begin(), sources.begin() + len);
    if (p.setting == SplitSetting::one_labeled_domain &&
        std::find(p.source_domains.begin(), p.source_domains.end(),
                  p.labeled_domain) == p.source_domains.end()) {
      p.labeled_domain = p.source_domains.front();
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

StepBatch sample_step_batches(const TrainingView& view, int labeled_batch,
                              int unlabeled_batch, Rng& rng) {
  if (!view.data || view.sources.empty()) {
    throw ParameterError("sample_step_batches: empty training view");
  }
  StepBatch sb;
  for (const DomainView& dv : view.sources) {
    const auto& samples = view.data->domains[dv.domain_id];
    if (dv.unlabeled_indices.empty()) {
      throw ParameterError("sample_step_batches: domain has no samples");
    }
    DomainBatch batch;
    BatchDiagnostics diag;
    batch.domain_id = dv.domain_id;
    if (!dv.labeled_indices.empty()) {
      std::vector<int> picks = rng.sample_indices(
          static_cast<int>(dv.labeled_indices.size()), labeled_batch);
      for (int p : picks) {
        const Sample& s = samples[dv.labeled_indices[p]];
        batch.labeled_x.push_back(s.x);
        batch.labeled_y.push_back(s.label);
      }
    }
    std::vector<int> upicks = rng.sample_indices(
        static_cast<int>(dv.unlabeled_indices.size()), unlabeled_batch);
    for (int p : upicks) {
      const Sample& s = samples[dv.unlabeled_indices[p]];
      batch.unlabeled_x.push_back(s.x);
      diag.unlabeled_truth.push_back(s.label);
    }
    sb.domains.push_back(std::move(batch));
    sb.diagnostics.push_back(std::move(diag));
  }
  return sb;
}

Augmenter Augmenter::fit(const TrainingView& view) {
  if (!view.data || view.sources.empty()) {
    throw ParameterError("Augmenter: empty training view");
  }
  const int D = view.data->input_dim();
  std::vector<double> mean(D, 0.0);
  std::vector<double> sq(D, 0.0);
  std::size_t n = 0;
  for (const DomainView& dv : view.sources) {
    for (int idx : dv.unlabeled_indices) {
      const Sample& s = view.data->domains[dv.domain_id][idx];
      for (int j = 0; j < D; ++j) {
        mean[j] += s.x[j];
        sq[j] += s.x[j] * s.x[j];
      }
      ++n;
    }
  }
  Augmenter aug;
  aug.coord_std.resize(D);
  for (int j = 0; j < D; ++j) {
    const double m = mean[j] / n;
    const double var = std::max(0.0, sq[j] / n - m * m);
    aug.coord_std[j] = std::sqrt(var);
  }
  return aug;
}

std::vector<double> Augmenter::weak(std::span<const double> x,
                                    Rng& rng) const {
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = x[j] + weak_noise * coord_std[j] * rng.normal();
  }
  return out;
}

std::vector<double> Augmenter::strong(std::span<const double> x,
                                      Rng& rng) const {
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = x[j] + strong_noise * coord_std[j] * rng.normal();
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (rng.uniform() < dropout_p) out[j] = 0.0;
  }
  const double g = rng.uniform(scale_lo, scale_hi);
  for (double& v : out) v *= g;
  return out;
}

}  // namespace dgwm
