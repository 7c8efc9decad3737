// wend: dataset generation, training, evaluation, sweeps and overlays.
#include <unistd.h>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wend/error.hpp"
#include "wend/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  // Empty means "not given".
  std::string seed, eta, gamma, alpha, tau, ratio, model, k;
};

void add_common(CLI::App* app, Common& c, bool overrides) {
  app->add_option("--config", c.config, "key=value config file");
  app->add_option("--out", c.out, "output directory (or file for eval)");
  app->add_option("--seed", c.seed, "seed (data.seed for gen-data, run.seed otherwise)");
  app->add_option("--set", c.sets, "extra key=value override, repeatable");
  if (!overrides) return;
  app->add_option("--eta", c.eta, "loss.eta");
  app->add_option("--gamma", c.gamma, "loss.gamma");
  app->add_option("--alpha", c.alpha, "loss.alpha");
  app->add_option("--tau", c.tau, "loss.tau1 and loss.tau2");
  app->add_option("--ratio", c.ratio, "assign.ratio, POS:NEG");
  app->add_option("--model", c.model, "bcd, bcd-no-we or scr");
  app->add_option("--k", c.k, "comma-separated k values, e.g. 1,5");
}

wend::KeyValues overrides_of(const Common& c, const char* seed_key) {
  wend::KeyValues kv;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw wend::ValidationError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!c.seed.empty()) kv[seed_key] = c.seed;
  if (!c.eta.empty()) kv["loss.eta"] = c.eta;
  if (!c.gamma.empty()) kv["loss.gamma"] = c.gamma;
  if (!c.alpha.empty()) kv["loss.alpha"] = c.alpha;
  if (!c.tau.empty()) {
    kv["loss.tau1"] = c.tau;
    kv["loss.tau2"] = c.tau;
  }
  if (!c.ratio.empty()) kv["assign.ratio"] = c.ratio;
  if (!c.model.empty()) kv["model.kind"] = c.model;
  if (!c.k.empty()) kv["eval.k"] = c.k;
  return kv;
}

std::vector<int> parse_ks(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw wend::ValidationError("--k expects integers, got '" + s + "'");
    }
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string self_exe(const char* argv0) {
  char buf[4096];
  const ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n > 0) return std::string(buf, static_cast<std::size_t>(n));
  return argv0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary-class detector with a weighted-entropy loss for weakly supervised localization"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, sweep_c, render_c;
  std::string train_data, sweep_data, eval_manifest, eval_preds, render_manifest, render_preds;
  std::string sweep_axis = "eta", sweep_values, sweep_seeds = "0";
  int sweep_jobs = 1;
  bool verbose = false;

  auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset");
  add_common(gen, gen_c, false);

  auto* train = app.add_subcommand("train", "train one model and evaluate every epoch");
  add_common(train, train_c, true);
  train->add_option("--data", train_data, "dataset directory from gen-data")->required();
  train->add_flag("-v,--verbose", verbose, "per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "score a predictions file against a manifest");
  add_common(eval, eval_c, true);
  eval->add_option("--manifest", eval_manifest, "manifest .jsonl")->required();
  eval->add_option("--predictions", eval_preds, "predictions .jsonl")->required();

  auto* sweep = app.add_subcommand("sweep", "one training run per value and seed");
  add_common(sweep, sweep_c, true);
  sweep->add_option("--data", sweep_data, "dataset directory from gen-data")->required();
  sweep->add_option("--axis", sweep_axis, "eta, gamma_alpha, tau or ratio");
  sweep->add_option("--values", sweep_values, "comma-separated values, e.g. 4,2,1 or 6:0.1,4:0.25")->required();
  sweep->add_option("--seeds", sweep_seeds, "comma-separated run seeds");
  sweep->add_option("--jobs", sweep_jobs, "parallel worker processes");
  sweep->add_flag("-v,--verbose", verbose, "per-epoch progress on stderr");

  auto* render = app.add_subcommand("render", "draw ground-truth and predicted boxes");
  add_common(render, render_c, false);
  render->add_option("--manifest", render_manifest, "manifest .jsonl")->required();
  render->add_option("--predictions", render_preds, "predictions .jsonl (optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      if (gen_c.out.empty()) throw wend::ValidationError("--out is required");
      const auto cfg = wend::load_run_config(gen_c.config, overrides_of(gen_c, "data.seed"));
      wend::cmd_gen_data(cfg, gen_c.out);
    } else if (*train) {
      if (train_c.out.empty()) throw wend::ValidationError("--out is required");
      const auto cfg = wend::load_run_config(train_c.config, overrides_of(train_c, "run.seed"));
      const auto rec = wend::cmd_train(cfg, train_data, train_c.out, verbose);
      std::cout << wend::metrics_csv(rec.final_metrics);
    } else if (*eval) {
      std::vector<int> ks{1, 5};
      if (!eval_c.k.empty()) ks = parse_ks(eval_c.k);
      const auto report = wend::cmd_eval(eval_manifest, eval_preds, ks);
      const std::string csv = wend::metrics_csv(report);
      if (eval_c.out.empty()) std::cout << csv;
      else wend::write_text_file(eval_c.out, csv);
    } else if (*sweep) {
      if (sweep_c.out.empty()) throw wend::ValidationError("--out is required");
      const auto cfg = wend::load_run_config(sweep_c.config, overrides_of(sweep_c, "run.seed"));
      wend::SweepOptions opts;
      opts.axis = wend::parse_sweep_axis(sweep_axis);
      opts.values = split_list(sweep_values);
      opts.seeds.clear();
      for (const auto& s : split_list(sweep_seeds)) {
        try {
          opts.seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
          throw wend::ValidationError("--seeds expects integers, got '" + s + "'");
        }
      }
      opts.jobs = sweep_jobs;
      opts.worker_exe = self_exe(argv[0]);
      opts.verbose = verbose;
      const auto rows = wend::cmd_sweep(cfg, opts, sweep_data, sweep_c.out);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.status != "ok";
      std::cout << rows.size() << " runs, " << failed << " failed\n";
    } else if (*render) {
      if (render_c.out.empty()) throw wend::ValidationError("--out is required");
      const auto n = wend::cmd_render(render_manifest, render_preds, render_c.out);
      std::cout << n << " images\n";
    }
  } catch (const wend::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wend::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
