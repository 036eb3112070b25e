#include <iostream>

#include "CLI11.hpp"
#include "cep/error.hpp"
#include "stages.hpp"

namespace {

using namespace cep;
using namespace cep::cli;

void add_model_options(CLI::App* cmd, ModelConfig& cfg) {
  cmd->add_option("--embedding-dim", cfg.embedding_dim, "Embedding width per column")->check(CLI::PositiveNumber);
  cmd->add_option("--hidden-dim", cfg.hidden_dim, "Hidden width")->check(CLI::PositiveNumber);
  cmd->add_option("--blocks", cfg.residual_blocks, "Residual blocks")->check(CLI::NonNegativeNumber);
  cmd->add_option("--dropout", cfg.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.999));
  cmd->add_option("--bins", cfg.numeric_bins, "Bins per numerical column")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", cfg.batch_size, "Batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", cfg.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const StageError*>(&e)) return 3;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const FormatError*>(&e)) {
    return 2;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardinality-estimator unlearning pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic star schema");
  gen_cmd->add_option("--profile", gen.profile, "skewed or uniform")->check(CLI::IsMember({"skewed", "uniform"}));
  gen_cmd->add_option("--seed", gen.seed, "Data seed");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the original model");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--seed", train.seed, "Model seed");
  add_model_options(train_cmd, train.model);

  DeleteArgs del;
  auto* del_cmd = app.add_subcommand("delete", "Split a dataset by a deletion task");
  del_cmd->add_option("--data", del.data, "Dataset directory")->required();
  del_cmd->add_option("--task", del.task, "Task name, e.g. A-1-1.0")->required();
  del_cmd->add_option("--cond", del.conditions, "Per-table condition: 't.c=label', 't.c in lo hi' or 't'");
  del_cmd->add_option("--seed", del.seed, "Deletion seed");
  del_cmd->add_option("--out", del.out, "Output directory")->required();

  UnlearnArgs un;
  std::string method = "cep";
  std::string loss_mode = "per_conditional";
  bool no_domain = false;
  bool no_sensitivity = false;
  auto* un_cmd = app.add_subcommand("unlearn", "Apply an unlearning method");
  un_cmd->add_option("--data", un.data, "Dataset directory")->required();
  un_cmd->add_option("--split", un.split, "Split directory from `delete`")->required();
  un_cmd->add_option("--model", un.model, "Original checkpoint");
  un_cmd->add_option("--out", un.out, "Output directory")->required();
  un_cmd->add_option("--method", method, "stale, retrain, finetune or cep")
      ->check(CLI::IsMember({"stale", "retrain", "finetune", "cep"}));
  un_cmd->add_option("--alpha", un.options.cep.alpha, "Total prune fraction")->check(CLI::Range(0.0, 0.999999));
  un_cmd->add_option("--ns", un.options.cep.sampling_iterations, "Score batches per table")->check(CLI::PositiveNumber);
  un_cmd->add_option("--loss-mode", loss_mode, "per_conditional or joint");
  un_cmd->add_option("--finetune-epochs", un.options.cep.finetune_epochs, "Fine-tune epochs")
      ->check(CLI::NonNegativeNumber);
  un_cmd->add_flag("--no-domain-prune", no_domain, "Disable domain pruning (cep)");
  un_cmd->add_flag("--no-sensitivity-prune", no_sensitivity, "Disable sensitivity pruning (cep)");
  un_cmd->add_flag("--domain-prune", un.options.domain_prune, "Domain pruning for retrain and finetune");
  un_cmd->add_flag("--dump-scores", un.dump_scores, "Write the last score vector to scores.bin");
  un_cmd->add_option("--seed", un.seed, "Unlearning seed");
  add_model_options(un_cmd, un.options.model);

  EvalArgs ev;
  std::string eval_method = "cep";
  auto* ev_cmd = app.add_subcommand("eval", "Q-error evaluation against the retained database");
  ev_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  ev_cmd->add_option("--split", ev.split, "Split directory")->required();
  ev_cmd->add_option("--model", ev.model, "Checkpoint to evaluate")->required();
  ev_cmd->add_option("--out", ev.out, "Output directory")->required();
  ev_cmd->add_option("--method", eval_method, "Method that produced the checkpoint (stale scales by |T| original)")
      ->check(CLI::IsMember({"stale", "retrain", "finetune", "cep"}));
  ev_cmd->add_option("--workload", ev.workload, "Workload file; generated when absent");
  ev_cmd->add_option("--queries", ev.queries, "Generated query count")->check(CLI::NonNegativeNumber);
  ev_cmd->add_option("--workload-seed", ev.workload_seed, "Workload seed");
  ev_cmd->add_option("--types", ev.types, "oq, cq or both")->check(CLI::IsMember({"oq", "cq", "both"}));
  ev_cmd->add_option("--samples", ev.samples, "Progressive samples per query")->check(CLI::PositiveNumber);
  ev_cmd->add_option("--seed", ev.seed, "Evaluation seed");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Consolidate evaluation runs");
  rep_cmd->add_option("--runs", rep.runs, "Evaluation directories")->required();
  rep_cmd->add_option("--out", rep.out, "Output directory")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Full pipeline from a JSON manifest");
  run_cmd->add_option("--manifest", run.manifest, "Manifest file")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) {
      gen_data(gen);
    } else if (*train_cmd) {
      cep::cli::train_model(train);
    } else if (*del_cmd) {
      delete_rows(del);
    } else if (*un_cmd) {
      un.method = parse_method(method);
      un.options.cep.loss_mode = parse_loss_mode(loss_mode);
      un.options.cep.enable_domain_prune = !no_domain;
      un.options.cep.enable_sensitivity_prune = !no_sensitivity;
      unlearn(un);
    } else if (*ev_cmd) {
      ev.method = parse_method(eval_method);
      eval(ev);
    } else if (*rep_cmd) {
      report(rep);
    } else if (*run_cmd) {
      run_pipeline(run);
    }
  } catch (const std::exception& e) {
    std::cerr << "cepctl: " << e.what() << '\n';
    return exit_code(e);
  }
  return 0;
}
