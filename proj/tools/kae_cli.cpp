// kae: train, evaluate, sweep and report polynomial and baseline autoencoders.
//
//   kae train  --config exp.cfg [--family kae:3 --seeds 2024..2026 ...]
//   kae eval   CHECKPOINT --tasks reconstruction,retrieval [--config exp.cfg]
//   kae bench  --config exp.cfg
//   kae report RECORDS [--format csv|json|markdown]

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kae/kae.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string dataset;
  std::string family;
  std::string latent;
  std::string order;
  std::string seeds;
  std::string tasks;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value experiment file");
  cmd->add_option("--dataset", o.dataset, "mnist, fashion-mnist, cifar10 or cifar100");
  cmd->add_option("--family", o.family, "comma list: ae, kae, kae:P, kan, fourier, wavelet");
  cmd->add_option("--latent", o.latent, "bottleneck width");
  cmd->add_option("--order", o.order, "polynomial order for a bare kae");
  cmd->add_option("--seeds", o.seeds, "comma list or a..b range");
  cmd->add_option("--tasks", o.tasks, "comma list of tasks, or all");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--quiet", o.quiet, "no progress lines on stderr");
}

kae::ExperimentConfig resolve(const Overrides& o) {
  kae::ExperimentConfig c;
  if (!o.config.empty()) c = kae::load_config(o.config);
  // order first so that a bare "kae" in --family picks it up
  if (!o.order.empty()) kae::apply_setting(c, "order", o.order);
  if (!o.dataset.empty()) kae::apply_setting(c, "dataset", o.dataset);
  if (!o.family.empty()) kae::apply_setting(c, "families", o.family);
  if (!o.latent.empty()) kae::apply_setting(c, "latent", o.latent);
  if (!o.seeds.empty()) kae::apply_setting(c, "seeds", o.seeds);
  if (!o.tasks.empty()) kae::apply_setting(c, "tasks", o.tasks);
  if (!o.out.empty()) kae::apply_setting(c, "out_dir", o.out);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial (KAE) and baseline autoencoder lab"};
  app.require_subcommand(1);

  Overrides train_o, eval_o, bench_o;
  auto* train = app.add_subcommand("train", "train every grid point and seed; write checkpoints and curves.csv");
  add_common(train, train_o);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; append to records.csv");
  std::string checkpoint;
  eval->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  add_common(eval, eval_o);

  auto* bench = app.add_subcommand("bench", "full sweep with aggregation and best-configuration report");
  add_common(bench, bench_o);

  auto* report = app.add_subcommand("report", "render a records file");
  std::string records_path, format = "markdown", selection = "per-task";
  report->add_option("records", records_path, "records CSV or JSON")->required();
  report->add_option("--format", format, "csv, json or markdown");
  report->add_option("--selection", selection, "per-task or reconstruction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*train) {
      const auto c = resolve(train_o);
      const auto runs = kae::cmd_train(c, train_o.quiet ? nullptr : &std::cerr);
      for (const auto& r : runs)
        std::cout << r.key.run_id() << " " << kae::checkpoint_path(c, r.key).string() << " final_test_mse "
                  << (r.test_curve.empty() ? 0.0 : r.test_curve.back()) << "\n";
    } else if (*eval) {
      const auto c = resolve(eval_o);
      std::cout << kae::kRecordsHeader << "\n";
      for (const auto& r : kae::cmd_eval(checkpoint, c.tasks, c)) std::cout << kae::record_csv_line(r) << "\n";
    } else if (*bench) {
      const auto c = resolve(bench_o);
      kae::cmd_bench(c, bench_o.quiet ? nullptr : &std::cerr);
      std::cout << kae::read_text(c.out_dir / "report.md");
    } else if (*report) {
      const auto fmt = kae::parse_report_format(format);
      if (!fmt) throw kae::Error(kae::ErrorKind::Usage, "unknown report format '" + format + "'");
      const auto mode = kae::parse_selection(selection);
      if (!mode) throw kae::Error(kae::ErrorKind::Usage, "unknown selection '" + selection + "'");
      std::cout << kae::cmd_report(records_path, *fmt, *mode);
    }
  } catch (const kae::Error& e) {
    std::cerr << "kae: " << e.what() << "\n";
    return e.kind() == kae::ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "kae: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
