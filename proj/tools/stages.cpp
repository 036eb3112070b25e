#include "stages.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cep/checkpoint.hpp"
#include "cep/datagen.hpp"
#include "cep/error.hpp"
#include "cep/io.hpp"
#include "cep/join.hpp"
#include "cep/sampler.hpp"
#include "cep/train.hpp"

namespace cep::cli {

namespace {

void require_input(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) throw StageError("missing " + path.string() + "; run `cepctl " + producer + "` first");
}

std::string hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t fnv1a(std::string_view bytes) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string trace_csv(const std::vector<double>& trace) {
  std::string out = "step,loss\n";
  for (size_t i = 0; i < trace.size(); ++i) out += std::to_string(i + 1) + ',' + format_double(trace[i]) + '\n';
  return out;
}

std::vector<double> read_trace(const fs::path& path) {
  std::vector<double> out;
  const auto rows = parse_csv(read_file(path));
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() == 2) out.push_back(std::stod(rows[i][1]));
  }
  return out;
}

JoinRelation join_for(const SchemaGraph& db) {
  try {
    return materialize_join(db);
  } catch (const SizeError&) {
    return unmaterialized_join(db);
  }
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

SchemaGraph load_data_dir(const fs::path& dir) {
  require_input(dir / "schema.txt", "gen-data");
  return load_dataset(dir);
}

DatasetSplit load_split(const fs::path& data, const fs::path& split) {
  require_input(split / "task.json", "delete");
  const auto db = load_data_dir(data);
  const auto task = read_json(split / "task.json");
  const auto parsed = make_task(task.at("name").get<std::string>(), task.at("conditions").get<std::vector<std::string>>(), db);
  return apply_deletion(db, parsed, task.at("seed").get<uint64_t>());
}

json model_config_json(const ModelConfig& cfg) {
  return json{{"embedding_dim", cfg.embedding_dim}, {"hidden_dim", cfg.hidden_dim},
              {"residual_blocks", cfg.residual_blocks}, {"dropout", cfg.dropout},
              {"numeric_bins", cfg.numeric_bins}, {"learning_rate", cfg.learning_rate},
              {"batch_size", cfg.batch_size}, {"epochs", cfg.epochs}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig base) {
  base.embedding_dim = get_or(j, "embedding_dim", base.embedding_dim);
  base.hidden_dim = get_or(j, "hidden_dim", base.hidden_dim);
  base.residual_blocks = get_or(j, "residual_blocks", base.residual_blocks);
  base.dropout = get_or(j, "dropout", base.dropout);
  base.numeric_bins = get_or(j, "numeric_bins", base.numeric_bins);
  base.learning_rate = get_or(j, "learning_rate", base.learning_rate);
  base.batch_size = get_or(j, "batch_size", base.batch_size);
  base.epochs = get_or(j, "epochs", base.epochs);
  return base;
}

void write_manifest(const fs::path& dir, const std::string& stage, const json& config, const json& seeds,
                    const json& inputs) {
  json m;
  m["stage"] = stage;
  m["version"] = kVersion;
  m["checkpoint_version"] = kCheckpointVersion;
  m["config"] = config;
  m["config_hash"] = hex(fnv1a(config.dump()));
  m["seeds"] = seeds;
  m["inputs"] = inputs;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void gen_data(const GenDataArgs& args) {
  const auto db = gen_star_schema(profile_by_name(args.profile, args.seed));
  save_dataset(db, args.out);
  std::string stats = "table,rows\n";
  for (const auto& t : db.tables()) stats += t->name() + ',' + std::to_string(t->row_count()) + '\n';
  write_file(args.out / "tables.csv", stats);
  write_manifest(args.out, "gen-data", {{"profile", args.profile}}, {{"data", args.seed}}, json::object());
}

void train_model(const TrainArgs& args) {
  const auto db = load_data_dir(args.data);
  const auto rel = join_for(db);
  auto model = init_model(model_columns(rel.columns(), args.model.numeric_bins), args.model, Rng::derive(args.seed, 3));
  auto sampler = make_sampler(rel);
  const auto result = train(model, *sampler, Rng::derive(args.seed, 1));
  save_checkpoint(model, args.out / "model.ckpt");
  write_file(args.out / "loss.csv", trace_csv(result.loss_trace));
  write_file(args.out / "timing.csv", "stage,seconds\ntrain_seconds," + format_double(result.seconds) + '\n');
  write_manifest(args.out, "train", model_config_json(args.model), {{"model", args.seed}},
                 {{"data", args.data.string()}, {"parameters", model.num_parameters()},
                  {"checksum", hex(model.checksum())}});
}

void delete_rows(const DeleteArgs& args) {
  const auto db = load_data_dir(args.data);
  const auto task = make_task(args.task, args.conditions, db);
  const auto split = apply_deletion(db, task, args.seed);
  std::vector<std::string> conditions;
  for (const auto& c : task.per_table) conditions.push_back(describe_condition(c, db));
  const json task_json{{"name", task.name()}, {"conditions", conditions}, {"seed", args.seed}};
  write_file(args.out / "task.json", task_json.dump(2) + "\n");
  save_dataset(split.retained, args.out / "retained");
  save_dataset(split.deleted, args.out / "deleted");
  std::string stats = "table,retained_rows,deleted_rows\n";
  for (size_t t = 0; t < db.num_tables(); ++t) {
    stats += db.table(t).name() + ',' + std::to_string(split.retained_rows[t].size()) + ',' +
             std::to_string(split.deleted_rows[t].size()) + '\n';
  }
  write_file(args.out / "rows.csv", stats);
  write_manifest(args.out, "delete", task_json, {{"delete", args.seed}}, {{"data", args.data.string()}});
}

void unlearn(const UnlearnArgs& args) {
  const auto split = load_split(args.data, args.split);
  std::optional<ArDensityModel> original;
  if (args.method != Method::retrain) require_input(args.model, "train");
  if (!args.model.empty() && fs::exists(args.model)) original = load_checkpoint(args.model);

  auto options = args.options;
  if (args.method == Method::retrain && original) {
    options.model = model_config_from_json(model_config_json(original->config()), options.model);
  }
  const auto result = run_method(args.method, original ? &*original : nullptr, split, options, args.seed);
  save_checkpoint(result.model, args.out / "model.ckpt");
  write_file(args.out / "timing.csv", "stage,seconds\nprune_seconds," + format_double(result.prune_seconds) +
                                          "\nfinetune_seconds," + format_double(result.finetune_seconds) + '\n');
  write_file(args.out / "loss.csv", trace_csv(result.loss_trace));
  if (result.domain) {
    std::string csv = "column,deleted_values,remapped\n";
    for (const auto& c : result.domain->columns) {
      csv += c.column + ',' + std::to_string(c.deleted_values) + ',' + (c.remapped ? "1" : "0") + '\n';
    }
    write_file(args.out / "domain.csv", csv);
  }
  if (result.sensitivity) {
    const auto& s = *result.sensitivity;
    std::string csv = "column,sensitivity\n";
    for (size_t c = 0; c < s.sensitivities.size(); ++c) {
      csv += result.model.column(c).name + ',' + format_double(s.sensitivities[c]) + '\n';
    }
    write_file(args.out / "sensitivity.csv", csv);
    csv = "table,semi_join_size,requested,pruned,saturated,empty\n";
    for (const auto& t : s.tables) {
      csv += t.table + ',' + format_double(t.semi_join_size) + ',' + std::to_string(t.step.requested) + ',' +
             std::to_string(t.step.pruned) + ',' + (t.step.saturated ? "1" : "0") + ',' + (t.empty ? "1" : "0") + '\n';
    }
    write_file(args.out / "prune.csv", csv);
    if (args.dump_scores) {
      save_scores(ScoreFile{result.model.checksum(), static_cast<uint64_t>(options.cep.sampling_iterations),
                            s.last_scores},
                  args.out / "scores.bin");
    }
  }
  const auto& c = options.cep;
  const json config{{"method", to_string(args.method)},
                    {"alpha", c.alpha},
                    {"ns", c.sampling_iterations},
                    {"loss_mode", to_string(c.loss_mode)},
                    {"domain_prune", args.method == Method::cep ? c.enable_domain_prune : options.domain_prune},
                    {"sensitivity_prune", args.method == Method::cep && c.enable_sensitivity_prune},
                    {"finetune_epochs", c.finetune_epochs},
                    {"model", model_config_json(options.model)}};
  write_manifest(args.out, "unlearn", config, {{"unlearn", args.seed}},
                 {{"data", args.data.string()}, {"split", args.split.string()}, {"model", args.model.string()},
                  {"checksum", hex(result.model.checksum())}});
}

void eval(const EvalArgs& args) {
  if (args.types != "oq" && args.types != "cq" && args.types != "both") {
    throw ValidationError("--types must be oq, cq or both");
  }
  require_input(args.model, "unlearn");
  const auto split = load_split(args.data, args.split);
  const auto model = load_checkpoint(args.model);

  std::vector<Query> workload;
  if (!args.workload.empty()) {
    require_input(args.workload, "eval");
    workload = parse_workload(read_file(args.workload), split.original);
  } else {
    WorkloadConfig wc;
    wc.focus_columns = split.task.columns();
    workload = gen_workload(split.original, args.queries, args.workload_seed, wc);
  }
  write_file(args.out / "workload.txt", format_workload(workload, split.original));

  auto items = prepare_eval(workload, split.task, split.retained);
  std::erase_if(items, [&](const EvalItem& item) {
    return (args.types == "oq" && item.type != QueryType::original) ||
           (args.types == "cq" && item.type != QueryType::complement);
  });
  const double join_size = count_join(args.method == Method::stale ? split.original : split.retained);
  EvalConfig ec;
  ec.num_samples = args.samples;
  ec.seed = args.seed;
  const auto result = evaluate(model, items, join_size, ec);
  write_file(args.out / "report.csv", format_report_csv(result));
  write_file(args.out / "summary.csv", format_summary_csv(result));
  write_manifest(args.out, "eval",
                 {{"method", to_string(args.method)}, {"types", args.types}, {"samples", args.samples},
                  {"queries", workload.size()}, {"join_size", join_size}, {"task", split.task.name()}},
                 {{"eval", args.seed}, {"workload", args.workload_seed}},
                 {{"data", args.data.string()}, {"split", args.split.string()}, {"model", args.model.string()}});
}

void report(const ReportArgs& args) {
  if (args.runs.empty()) throw ValidationError("report needs at least one run directory");
  std::string table = "method,task,set,included,model_zero,true_zero,p50,p75,p95,p99\n";
  std::string md = "| method | task | set | p50 | p75 | p95 | p99 | excluded |\n|---|---|---|---|---|---|---|---|\n";
  std::vector<std::string> trace_names;
  std::vector<std::vector<double>> traces;
  for (const auto& dir : args.runs) {
    require_input(dir / "summary.csv", "eval");
    require_input(dir / "manifest.json", "eval");
    const auto manifest = read_json(dir / "manifest.json");
    const auto method = manifest.at("config").at("method").get<std::string>();
    const auto task = manifest.at("config").at("task").get<std::string>();
    const auto rows = parse_csv(read_file(dir / "summary.csv"));
    for (size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.size() != 8) throw ConfigError((dir / "summary.csv").string() + ": malformed row " + std::to_string(i + 1));
      table += method + ',' + task;
      for (const auto& cell : r) table += ',' + cell;
      table += '\n';
      md += "| " + method + " | " + task + " | " + r[0] + " | " + r[4] + " | " + r[5] + " | " + r[6] + " | " + r[7] +
            " | " + std::to_string(std::stoul(r[2]) + std::stoul(r[3])) + " |\n";
    }
    const fs::path model = manifest.at("inputs").at("model").get<std::string>();
    if (const auto loss = model.parent_path() / "loss.csv"; fs::exists(loss)) {
      auto trace = read_trace(loss);
      if (!trace.empty()) {
        trace_names.push_back(method);
        traces.push_back(std::move(trace));
      }
    }
  }
  write_file(args.out / "table.csv", table);
  write_file(args.out / "table.md", md);
  if (!traces.empty()) {
    const auto curves = convergence_trace(traces);
    std::string csv = "progress";
    for (const auto& n : trace_names) csv += ',' + n;
    csv += '\n';
    for (size_t k = 0; k < curves.front().size(); ++k) {
      csv += std::to_string(k);
      for (const auto& c : curves) csv += ',' + format_double(c[k]);
      csv += '\n';
    }
    write_file(args.out / "convergence.csv", csv);
  }
}

void run_pipeline(const RunArgs& args) {
  require_input(args.manifest, "run");
  const auto m = read_json(args.manifest);
  const auto seeds = m.value("seeds", json::object());
  const auto seed = [&](const char* key) { return seeds.value(key, m.value("seed", uint64_t{1})); };
  const auto& out = args.out;
  write_file(out / "manifest.json", m.dump(2) + "\n");

  const auto data_cfg = m.value("data", json::object());
  fs::path data = out / "data";
  if (data_cfg.contains("path")) {
    data = data_cfg.at("path").get<std::string>();
  } else {
    gen_data(GenDataArgs{data_cfg.value("profile", std::string("skewed")), seed("data"), data});
  }

  TrainArgs train_args{data, out / "original", seed("model"), model_config_from_json(m.value("model", json::object()))};
  train_model(train_args);

  const auto task = m.at("task");
  delete_rows(DeleteArgs{data, out / "split", task.at("name").get<std::string>(),
                         task.value("conditions", std::vector<std::string>{}), seed("delete")});

  const auto cep_cfg = m.value("cep", json::object());
  MethodOptions options;
  options.model = train_args.model;
  options.cep.alpha = cep_cfg.value("alpha", options.cep.alpha);
  options.cep.sampling_iterations = cep_cfg.value("ns", options.cep.sampling_iterations);
  options.cep.loss_mode = parse_loss_mode(cep_cfg.value("loss_mode", std::string("per_conditional")));
  options.cep.finetune_epochs = cep_cfg.value("finetune_epochs", options.cep.finetune_epochs);
  options.cep.enable_domain_prune = cep_cfg.value("domain_prune", true);
  options.cep.enable_sensitivity_prune = cep_cfg.value("sensitivity_prune", true);

  const auto wl = m.value("workload", json::object());
  const auto ev = m.value("eval", json::object());
  const auto methods = m.value("methods", std::vector<std::string>{"stale", "retrain", "finetune", "cep"});

  std::vector<fs::path> eval_dirs;
  std::string timing = "method,prune_seconds,finetune_seconds\n";
  for (const auto& name : methods) {
    const auto method = parse_method(name);
    const auto method_dir = out / "methods" / name;
    unlearn(UnlearnArgs{data, out / "split", out / "original" / "model.ckpt", method_dir, method, options,
                        seed("unlearn"), false});
    const auto rows = parse_csv(read_file(method_dir / "timing.csv"));
    timing += name + ',' + rows.at(1).at(1) + ',' + rows.at(2).at(1) + '\n';

    EvalArgs eval_args;
    eval_args.data = data;
    eval_args.split = out / "split";
    eval_args.model = method_dir / "model.ckpt";
    eval_args.out = out / "eval" / name;
    eval_args.method = method;
    eval_args.queries = wl.value("queries", eval_args.queries);
    eval_args.workload_seed = seed("workload");
    eval_args.types = ev.value("types", eval_args.types);
    eval_args.samples = ev.value("samples", eval_args.samples);
    eval_args.seed = seed("eval");
    eval(eval_args);
    eval_dirs.push_back(eval_args.out);
  }
  report(ReportArgs{eval_dirs, out / "report"});
  fs::copy_file(out / "report" / "table.csv", out / "summary.csv", fs::copy_options::overwrite_existing);
  write_file(out / "timing.csv", timing);
}

}  // namespace cep::cli
