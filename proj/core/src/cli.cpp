#include "dgwm/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "dgwm/analysis.hpp"
#include "dgwm/checkpoint.hpp"
#include "dgwm/errors.hpp"
#include "dgwm/experiment.hpp"
#include "dgwm/gradcheck.hpp"

namespace dgwm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kUsage =
    "usage: dgwm <subcommand> [--config FILE] [--key value | --key=value]...\n"
    "\n"
    "subcommands:\n"
    "  train        run `trials` seeded training runs and aggregate metrics\n"
    "  eval         evaluate a saved checkpoint on every domain\n"
    "  ablate       re-run training over a one-key grid: --grid key=v1,v2,...\n"
    "  verify       run the numeric/structural property suite\n"
    "  sweep        confidence-threshold sweep on a trained model\n"
    "  gen-data     generate and export a synthetic multi-domain dataset\n"
    "  add-domains  train on growing source prefixes, with/without modulation\n"
    "  overhead     compare per-epoch wall time with modulation off vs. on\n"
    "\n"
    "Config keys double as flags (dashes and underscores both accepted),\n"
    "e.g. --labels-per-class 10 --epsilon-sq 1.0 --mask-variant low_rank.\n"
    "Extra flags: --checkpoint FILE (eval, sweep), --grid KEY=V1,V2,...\n"
    "(ablate), --taus V1,V2,... and --sweep-batches N (sweep).\n"
    "Outputs land in <output_dir>/<run_id>/; output_dir falls back to the\n"
    "DGWM_OUTPUT_DIR environment variable, then ./runs.\n";

struct Invocation {
  std::string subcommand;
  ExperimentConfig cfg;
  std::string checkpoint;
  std::string grid;
  std::vector<double> taus = {0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  int sweep_batches = 20;
};

std::string normalize_key(const std::string& raw) {
  std::string out = raw;
  for (char& c : out) {
    if (c == '-') c = '_';
  }
  return out;
}

std::vector<double> parse_tau_list(const std::string& value) {
  std::vector<double> out;
  std::istringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw ParameterError("taus: bad value '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ParameterError("taus: empty list");
  return out;
}

// Flags are applied twice: --config in a first pass, everything else after,
// so flag values always override file values regardless of order.
void parse_flags(const std::vector<std::string>& args, Invocation& inv) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& tok = args[i];
    if (tok.rfind("--", 0) != 0) {
      throw ParameterError("expected --flag, got '" + tok + "'");
    }
    std::string key;
    std::string value;
    const std::size_t eq = tok.find('=');
    if (eq != std::string::npos) {
      key = tok.substr(2, eq - 2);
      value = tok.substr(eq + 1);
    } else {
      key = tok.substr(2);
      if (i + 1 >= args.size()) {
        throw ParameterError("flag --" + key + " needs a value");
      }
      value = args[++i];
    }
    pairs.emplace_back(normalize_key(key), value);
  }
  for (const auto& [key, value] : pairs) {
    if (key == "config") {
      std::ifstream in(value);
      if (!in) throw ParameterError("config: cannot open " + value);
      std::ostringstream buf;
      buf << in.rdbuf();
      parse_config_text(buf.str(), inv.cfg, value);
    }
  }
  for (const auto& [key, value] : pairs) {
    if (key == "config") continue;
    if (key == "checkpoint") {
      inv.checkpoint = value;
    } else if (key == "grid") {
      inv.grid = value;
    } else if (key == "taus") {
      inv.taus = parse_tau_list(value);
    } else if (key == "sweep_batches") {
      inv.sweep_batches = static_cast<int>(std::stol(value));
      if (inv.sweep_batches < 1) {
        throw ParameterError("sweep_batches must be >= 1");
      }
    } else {
      inv.cfg.set(key, value);
    }
  }
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

fs::path prepare_run_dir(const Invocation& inv) {
  std::string base = inv.cfg.output_dir;
  if (base.empty()) {
    const char* env = std::getenv("DGWM_OUTPUT_DIR");
    base = env && *env ? env : "runs";
  }
  const std::string run_id =
      inv.subcommand + "-" + hash_hex(inv.cfg.config_hash()).substr(0, 8);
  fs::path dir = fs::path(base) / run_id;
  fs::create_directories(dir);

  std::ofstream cfg_out(dir / "config.txt");
  cfg_out << inv.cfg.canonical_text();

  // Provenance sidecar; the timestamp is the only run-to-run varying field
  // and lives only here.
  std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ",
                std::gmtime(&now));
  json meta;
  meta["subcommand"] = inv.subcommand;
  meta["config_hash"] = hash_hex(inv.cfg.config_hash());
  meta["base_seed"] = inv.cfg.train.seed;
  meta["timestamp"] = stamp;
  std::ofstream meta_out(dir / "meta.json");
  meta_out << meta.dump(2) << "\n";
  return dir;
}

MultiDomainDataset load_or_generate(const ExperimentConfig& cfg) {
  if (!cfg.dataset_path.empty()) return import_dataset_csv(cfg.dataset_path);
  return generate(cfg.shift);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= v.size();
  return {mean, std::sqrt(var)};
}

json metric_json(const std::vector<double>& values) {
  auto [m, s] = mean_std(values);
  json j;
  j["mean"] = m;
  j["std"] = s;
  j["values"] = values;
  return j;
}

double late_epoch_utilization(const RunRecord& rec, int total_epochs) {
  const int first = total_epochs / 2;
  double sum = 0.0;
  long count = 0;
  for (const RunRecord::Row& r : rec.rows) {
    if (r.epoch >= first) {
      sum += r.pl_utilization;
      ++count;
    }
  }
  return count > 0 ? sum / count : 0.0;
}

struct TrialSummary {
  std::vector<double> target_accuracy;
  std::vector<double> pl_accuracy_late;
  std::vector<double> pl_utilization_late;
};

// Runs cfg.trials seeded trainings (seed = base + trial index) and collects
// summary metrics. When dir is non-empty, per-trial artifacts are written
// there.
TrialSummary run_trials(const ExperimentConfig& cfg,
                        const MultiDomainDataset& ds, const fs::path& dir,
                        bool save_checkpoints) {
  TrainingView view = split(ds, cfg.plan);
  TrialSummary sum;
  for (int t = 0; t < cfg.trials; ++t) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + static_cast<std::uint64_t>(t);
    DomainInfoLog info_log;
    DomainInfoLog* log_ptr = (t == 0 && !dir.empty()) ? &info_log : nullptr;
    TrainResult res = train(view, tc, cfg.model, nullptr, log_ptr);

    double final_target;
    if (res.record.rows.empty()) {
      final_target =
          evaluate_accuracy(res.bundle, ds.domains[view.target_domain]);
    } else {
      final_target = res.record.rows.back().target_accuracy;
    }
    sum.target_accuracy.push_back(final_target);
    sum.pl_accuracy_late.push_back(
        late_epoch_pl_accuracy(res.record, tc.epochs));
    sum.pl_utilization_late.push_back(
        late_epoch_utilization(res.record, tc.epochs));

    if (!dir.empty()) {
      write_run_record_csv(res.record,
                           (dir / ("run_" + std::to_string(t) + ".csv"))
                               .string());
      if (save_checkpoints) {
        save_checkpoint(
            (dir / ("checkpoint_" + std::to_string(t) + ".bin")).string(),
            res.bundle);
      }
      if (log_ptr) {
        export_domain_info(info_log, (dir / "domain_info_0.csv").string());
      }
    }
  }
  return sum;
}

int cmd_train(const Invocation& inv) {
  fs::path dir = prepare_run_dir(inv);
  MultiDomainDataset ds = load_or_generate(inv.cfg);
  TrialSummary sum = run_trials(inv.cfg, ds, dir, /*save_checkpoints=*/true);

  json agg;
  agg["trials"] = inv.cfg.trials;
  agg["target_accuracy"] = metric_json(sum.target_accuracy);
  agg["pl_accuracy_late"] = metric_json(sum.pl_accuracy_late);
  agg["pl_utilization_late"] = metric_json(sum.pl_utilization_late);
  std::ofstream out(dir / "aggregate.json");
  out << agg.dump(2) << "\n";

  auto [tm, ts] = mean_std(sum.target_accuracy);
  auto [pm, ps] = mean_std(sum.pl_accuracy_late);
  std::cout << "run dir: " << dir.string() << "\n";
  std::printf("target_accuracy: %.4f +/- %.4f over %d trials\n", tm, ts,
              inv.cfg.trials);
  std::printf("pl_accuracy (late epochs): %.4f +/- %.4f\n", pm, ps);
  return 0;
}

int cmd_eval(const Invocation& inv) {
  if (inv.checkpoint.empty()) {
    throw ParameterError("eval needs --checkpoint FILE");
  }
  fs::path dir = prepare_run_dir(inv);
  MultiDomainDataset ds = load_or_generate(inv.cfg);
  ModelBundle bundle = load_checkpoint(inv.checkpoint);

  json rep;
  rep["checkpoint"] = inv.checkpoint;
  json per_domain = json::array();
  for (int k = 0; k < ds.num_domains(); ++k) {
    const double acc = evaluate_accuracy(bundle, ds.domains[k]);
    json row;
    row["domain"] = k;
    row["name"] = ds.domain_names[k];
    row["accuracy"] = acc;
    row["is_target"] = (k == inv.cfg.plan.target_domain);
    per_domain.push_back(row);
    std::printf("domain %d (%s): accuracy %.4f%s\n", k,
                ds.domain_names[k].c_str(), acc,
                k == inv.cfg.plan.target_domain ? "  [target]" : "");
  }
  rep["domains"] = per_domain;
  std::ofstream out(dir / "eval.json");
  out << rep.dump(2) << "\n";
  return 0;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '.' || c == '-';
    out += keep ? c : '_';
  }
  return out;
}

int cmd_ablate(const Invocation& inv) {
  if (inv.grid.empty()) {
    throw ParameterError("ablate needs --grid KEY=V1,V2,...");
  }
  const std::size_t eq = inv.grid.find('=');
  if (eq == std::string::npos) {
    throw ParameterError("--grid expects KEY=V1,V2,..., got '" + inv.grid +
                         "'");
  }
  const std::string key = normalize_key(inv.grid.substr(0, eq));
  std::vector<std::string> values;
  {
    std::istringstream ss(inv.grid.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) values.push_back(tok);
  }
  if (values.empty()) throw ParameterError("--grid has no values");

  fs::path dir = prepare_run_dir(inv);
  json cells = json::array();
  std::cout << "run dir: " << dir.string() << "\n";
  for (const std::string& value : values) {
    ExperimentConfig cell_cfg = inv.cfg;
    cell_cfg.set(key, value);
    cell_cfg.validate();
    MultiDomainDataset ds = load_or_generate(cell_cfg);
    fs::path cell_dir = dir / ("cell_" + sanitize(value));
    fs::create_directories(cell_dir);
    TrialSummary sum =
        run_trials(cell_cfg, ds, cell_dir, /*save_checkpoints=*/false);

    json cell;
    cell[key] = value;
    cell["target_accuracy"] = metric_json(sum.target_accuracy);
    cell["pl_accuracy_late"] = metric_json(sum.pl_accuracy_late);
    cells.push_back(cell);
    auto [m, s] = mean_std(sum.target_accuracy);
    std::printf("%s=%s: target_accuracy %.4f +/- %.4f\n", key.c_str(),
                value.c_str(), m, s);
  }
  json rep;
  rep["grid_key"] = key;
  rep["cells"] = cells;
  std::ofstream out(dir / "ablate.json");
  out << rep.dump(2) << "\n";
  return 0;
}

int cmd_verify(const Invocation& inv) {
  fs::path dir = prepare_run_dir(inv);
  struct Check {
    std::string name;
    bool pass;
    std::string detail;
  };
  std::vector<Check> checks;

  {  // masked-gradient identity, closed form vs backward vs finite diff
    Rng rng(11);
    double worst_closed = 0.0;
    double worst_fd = 0.0;
    const int C = 3;
    const int d = 8;
    for (int it = 0; it < 100; ++it) {
      std::vector<double> wv(C * d);
      std::vector<double> mv(C * d);
      std::vector<double> fx(d);
      for (double& v : wv) v = rng.normal();
      for (double& v : mv) v = rng.uniform();
      for (double& v : fx) v = rng.normal();
      Tensor W = Tensor::from_values({C, d}, wv);
      Tensor M = Tensor::from_values({C, d}, mv);
      GradientIdentityReport rep =
          verify_gradient_identity(W, M, fx, rng.uniform_int(C));
      worst_closed = std::max(worst_closed, rep.backward_vs_closed);
      worst_fd = std::max(worst_fd, rep.backward_vs_fd);
    }
    std::ostringstream detail;
    detail << "closed vs backward " << worst_closed << ", vs fd " << worst_fd;
    checks.push_back({"masked-gradient identity (100 instances)",
                      worst_closed <= 1e-9 && worst_fd <= 1e-5,
                      detail.str()});
  }

  {  // zero mask row annihilates the gradient row
    Rng rng(12);
    const int C = 3;
    const int d = 8;
    std::vector<double> wv(C * d);
    std::vector<double> mv(C * d);
    std::vector<double> fx(d);
    for (double& v : wv) v = rng.normal();
    for (double& v : mv) v = rng.uniform();
    for (double& v : fx) v = rng.normal();
    for (int j = 0; j < d; ++j) mv[1 * d + j] = 0.0;
    Tensor W = Tensor::from_values({C, d}, wv);
    Tensor M = Tensor::from_values({C, d}, mv);
    GradientIdentityReport rep = verify_gradient_identity(W, M, fx, 0);
    bool exact = true;
    for (int j = 0; j < d; ++j) {
      if (rep.grad_backward[1 * d + j] != 0.0) exact = false;
    }
    checks.push_back({"zero mask row annihilates gradient row", exact, ""});
  }

  {  // low-rank structure of the pre-sigmoid mask matrix
    Rng rng(13);
    ModelConfig mc;
    mc.input_dim = 16;
    mc.feature_dim = 16;
    mc.num_classes = 4;
    double worst = 0.0;
    for (int b = 0; b < 100; ++b) {
      ModelBundle bundle = ModelBundle::init(mc, rng);
      for (int it = 0; it < 10; ++it) {
        std::vector<double> I(mc.feature_dim);
        for (double& v : I) v = rng.normal();
        std::vector<double> vc = bundle.G1.forward_values(I);
        std::vector<double> vf = bundle.G2.forward_values(I);
        const int C = mc.num_classes;
        const int d = mc.feature_dim;
        std::vector<double> P(C * d);
        for (int c = 0; c < C; ++c) {
          for (int j = 0; j < d; ++j) P[c * d + j] = vc[c] * vf[j];
        }
        for (int a = 0; a < C; ++a) {
          for (int b2 = a + 1; b2 < C; ++b2) {
            for (int j = 0; j < d; ++j) {
              for (int k = j + 1; k < d; ++k) {
                const double minor = P[a * d + j] * P[b2 * d + k] -
                                     P[a * d + k] * P[b2 * d + j];
                worst = std::max(worst, std::fabs(minor));
              }
            }
          }
        }
      }
    }
    std::ostringstream detail;
    detail << "max |2x2 minor| " << worst;
    checks.push_back(
        {"low-rank mask: 2x2 minors vanish (1000 draws)", worst < 1e-9,
         detail.str()});
  }

  {  // zeroed G1 -> uniform 0.5 mask preserves the argmax
    Rng rng(14);
    ModelConfig mc;
    mc.input_dim = 12;
    mc.feature_dim = 16;
    mc.num_classes = 4;
    ModelBundle bundle = ModelBundle::init(mc, rng);
    bundle.G1.W.set_value(
        std::vector<double>(bundle.G1.W.numel(), 0.0));
    bool argmax_equal = true;
    bool conf_differs = false;
    for (int it = 0; it < 50; ++it) {
      std::vector<std::vector<double>> batch(
          6, std::vector<double>(mc.input_dim));
      for (auto& row : batch) {
        for (double& v : row) v = rng.normal();
      }
      MaskValues mv = mask_values_for_batch(bundle, batch);
      std::vector<double> raw = bundle.classifier(0).value();
      std::vector<double> mod = raw;
      for (std::size_t i = 0; i < mod.size(); ++i) mod[i] *= mv.M_ss[i];
      PseudoLabelResult a =
          pseudo_label_on_views(batch, bundle, mod, 0.0 + 1e-12, nullptr);
      PseudoLabelResult b =
          pseudo_label_on_views(batch, bundle, raw, 0.0 + 1e-12, nullptr);
      if (a.labels != b.labels) argmax_equal = false;
      for (std::size_t i = 0; i < a.confidences.size(); ++i) {
        if (a.confidences[i] != b.confidences[i]) conf_differs = true;
      }
    }
    checks.push_back({"uniform 0.5 mask keeps pseudo-label argmax",
                      argmax_equal && conf_differs, ""});
  }

  {  // feature partition is complementary and exhaustive
    Rng rng(15);
    bool ok = true;
    for (int it = 0; it < 200; ++it) {
      const int d = 1 + rng.uniform_int(32);
      std::vector<double> vf(d);
      for (double& v : vf) v = rng.normal() * (rng.uniform() < 0.1 ? 0.0 : 1.0);
      FeaturePartition p = partition_features(vf);
      std::vector<bool> seen(d, false);
      for (int j : p.J_plus) {
        if (seen[j] || vf[j] < 0.0) ok = false;
        seen[j] = true;
      }
      for (int j : p.J_minus) {
        if (seen[j] || vf[j] >= 0.0) ok = false;
        seen[j] = true;
      }
      for (bool s : seen) {
        if (!s) ok = false;
      }
    }
    checks.push_back({"feature partition complementary/exhaustive", ok, ""});
  }

  {  // cosine schedule endpoints
    SgdConfig sc;
    sc.total_epochs = 20;
    const double start = cosine_lr(0, sc, 1.0);
    const double end = cosine_lr(20, sc, 1.0);
    checks.push_back({"cosine schedule spans base..0",
                      start == 1.0 && std::fabs(end) <= 1e-12, ""});
  }

  {  // checkpoint round-trip is bit-exact
    Rng rng(16);
    ModelConfig mc;
    mc.input_dim = 12;
    mc.feature_dim = 16;
    mc.num_classes = 4;
    ModelBundle bundle = ModelBundle::init(mc, rng);
    const std::string path = (dir / "verify_ckpt.bin").string();
    save_checkpoint(path, bundle);
    ModelBundle back = load_checkpoint(path);
    bool ok = true;
    auto a = bundle.named_params();
    auto b = back.named_params();
    if (a.size() != b.size()) ok = false;
    for (std::size_t i = 0; ok && i < a.size(); ++i) {
      if (a[i].first != b[i].first || a[i].second.value() != b[i].second.value()) {
        ok = false;
      }
    }
    checks.push_back({"checkpoint round-trip bit-exact", ok, ""});
  }

  bool all = true;
  json rep = json::array();
  for (const Check& c : checks) {
    all = all && c.pass;
    std::printf("%s  %s%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.detail.empty() ? "" : "  -- ", c.detail.c_str());
    json j;
    j["name"] = c.name;
    j["pass"] = c.pass;
    j["detail"] = c.detail;
    rep.push_back(j);
  }
  std::ofstream out(dir / "verify.json");
  out << rep.dump(2) << "\n";
  std::printf("%s\n", all ? "all checks passed" : "CHECKS FAILED");
  return all ? 0 : 1;
}

int cmd_sweep(const Invocation& inv) {
  fs::path dir = prepare_run_dir(inv);
  MultiDomainDataset ds = load_or_generate(inv.cfg);
  TrainingView view = split(ds, inv.cfg.plan);

  ModelBundle bundle;
  if (!inv.checkpoint.empty()) {
    bundle = load_checkpoint(inv.checkpoint);
  } else {
    TrainResult res = train(view, inv.cfg.train, inv.cfg.model);
    bundle = std::move(res.bundle);
  }

  Augmenter aug = Augmenter::fit(view);
  Rng rng(inv.cfg.train.seed + 1000003ULL);
  SweepResult sr =
      threshold_sweep(bundle, view, inv.taus, inv.sweep_batches,
                      inv.cfg.train.unlabeled_batch, aug, rng);

  std::ofstream csv(dir / "sweep.csv");
  csv << "tau,modulated_pl_accuracy,modulated_utilization,"
         "baseline_pl_accuracy,baseline_utilization\n";
  for (std::size_t i = 0; i < sr.thresholds.size(); ++i) {
    char line[256];
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  sr.thresholds[i], sr.modulated_pl_accuracy[i],
                  sr.modulated_utilization[i], sr.baseline_pl_accuracy[i],
                  sr.baseline_utilization[i]);
    csv << line;
    std::printf(
        "tau %.2f: modulated acc %.4f util %.4f | baseline acc %.4f util "
        "%.4f\n",
        sr.thresholds[i], sr.modulated_pl_accuracy[i],
        sr.modulated_utilization[i], sr.baseline_pl_accuracy[i],
        sr.baseline_utilization[i]);
  }
  json rep;
  rep["thresholds"] = sr.thresholds;
  rep["modulated_pl_accuracy"] = sr.modulated_pl_accuracy;
  rep["modulated_utilization"] = sr.modulated_utilization;
  rep["baseline_pl_accuracy"] = sr.baseline_pl_accuracy;
  rep["baseline_utilization"] = sr.baseline_utilization;
  std::ofstream out(dir / "sweep.json");
  out << rep.dump(2) << "\n";
  return 0;
}

int cmd_add_domains(const Invocation& inv) {
  fs::path dir = prepare_run_dir(inv);
  MultiDomainDataset ds = load_or_generate(inv.cfg);
  AddingDomainsResult res =
      adding_domains_study(ds, inv.cfg.plan, inv.cfg.train, inv.cfg.model);

  for (std::size_t i = 0; i < res.prefix_sizes.size(); ++i) {
    const std::string suffix = std::to_string(res.prefix_sizes[i]);
    write_run_record_csv(res.modulated_runs[i],
                         (dir / ("modulated_" + suffix + ".csv")).string());
    write_run_record_csv(res.baseline_runs[i],
                         (dir / ("baseline_" + suffix + ".csv")).string());
    std::printf("%d source(s): modulated pl %.4f | baseline pl %.4f\n",
                res.prefix_sizes[i], res.modulated_pl[i], res.baseline_pl[i]);
  }
  json rep;
  rep["prefix_sizes"] = res.prefix_sizes;
  rep["modulated_pl_accuracy"] = res.modulated_pl;
  rep["baseline_pl_accuracy"] = res.baseline_pl;
  std::ofstream out(dir / "adding_domains.json");
  out << rep.dump(2) << "\n";
  return 0;
}

int cmd_overhead(const Invocation& inv) {
  fs::path dir = prepare_run_dir(inv);
  MultiDomainDataset ds = load_or_generate(inv.cfg);
  TrainingView view = split(ds, inv.cfg.plan);
  OverheadReport rep =
      overhead_report(view, inv.cfg.train, inv.cfg.model);
  std::printf(
      "per-epoch seconds: off %.4f, on %.4f -> overhead %.2f%% (%d epochs "
      "measured)\n",
      rep.mean_epoch_seconds_off, rep.mean_epoch_seconds_on,
      rep.overhead_percent, rep.epochs_measured);
  json j;
  j["mean_epoch_seconds_off"] = rep.mean_epoch_seconds_off;
  j["mean_epoch_seconds_on"] = rep.mean_epoch_seconds_on;
  j["overhead_percent"] = rep.overhead_percent;
  j["epochs_measured"] = rep.epochs_measured;
  std::ofstream out(dir / "overhead.json");
  out << j.dump(2) << "\n";
  return 0;
}

int cmd_gen_data(const Invocation& inv) {
  fs::path dir = prepare_run_dir(inv);
  MultiDomainDataset ds = generate(inv.cfg.shift);
  const std::string path = (dir / "dataset.csv").string();
  export_dataset_csv(ds, path);
  long total = 0;
  for (const auto& dom : ds.domains) total += static_cast<long>(dom.size());
  std::printf("wrote %ld samples across %d domains to %s\n", total,
              ds.num_domains(), path.c_str());
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  Invocation inv;
  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h" ||
        args[0] == "help") {
      std::cout << kUsage;
      return args.empty() ? 2 : 0;
    }
    inv.subcommand = args[0];
    const bool known =
        inv.subcommand == "train" || inv.subcommand == "eval" ||
        inv.subcommand == "ablate" || inv.subcommand == "verify" ||
        inv.subcommand == "sweep" || inv.subcommand == "gen-data" ||
        inv.subcommand == "add-domains" || inv.subcommand == "overhead";
    if (!known) {
      std::cerr << "unknown subcommand: " << inv.subcommand << "\n" << kUsage;
      return 2;
    }
    parse_flags(args, inv);
    if (inv.subcommand == "gen-data") {
      inv.cfg.shift.validate();  // split/train settings are unused here
    } else {
      inv.cfg.validate();
    }
  } catch (const ParameterError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  }

  try {
    if (inv.subcommand == "train") return cmd_train(inv);
    if (inv.subcommand == "eval") return cmd_eval(inv);
    if (inv.subcommand == "ablate") return cmd_ablate(inv);
    if (inv.subcommand == "verify") return cmd_verify(inv);
    if (inv.subcommand == "sweep") return cmd_sweep(inv);
    if (inv.subcommand == "gen-data") return cmd_gen_data(inv);
    if (inv.subcommand == "add-domains") return cmd_add_domains(inv);
    if (inv.subcommand == "overhead") return cmd_overhead(inv);
  } catch (const ParameterError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}

int run_command(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace dgwm
