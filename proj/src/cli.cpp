#include "neurphy/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cerrno>
#include <cstdlib>
#include <iostream>
#include <map>

#include "neurphy/checkpoint.hpp"
#include "neurphy/dataset_io.hpp"
#include "neurphy/io_util.hpp"
#include "neurphy/svg.hpp"

#ifndef NEURPHY_VERSION
#define NEURPHY_VERSION "0.0.0"
#endif

namespace neurphy::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using physics::Task;

namespace {

// Reference-scale settings, printed next to the active ones.
constexpr std::size_t kReferenceTasks = 651;
constexpr std::size_t kReferenceEpochs = 1000;
constexpr std::size_t kReferenceBatch = 50;

ordered_json artifact(const fs::path& path, const fs::path& base) {
  return {{"path", fs::relative(path, base).generic_string()}, {"sha256", sha256_file(path)}};
}

ordered_json read_manifest(const RunPaths& run) {
  try {
    return ordered_json::parse(read_file(run.manifest()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorrupt, "manifest: " + std::string(e.what()));
  }
}

// Dataset recorded by a run, checked against its recorded hash.
std::vector<Task> run_dataset(const RunPaths& run, const fs::path& override_path) {
  if (!override_path.empty()) return load_tasks_jsonl(override_path);
  const ordered_json m = read_manifest(run);
  const fs::path path = m.at("dataset").at("path").get<std::string>();
  const std::string expected = m.at("dataset").at("sha256").get<std::string>();
  if (sha256_file(path) != expected) {
    throw Error(ErrorCode::kCorrupt, "dataset " + path.string() + " no longer matches the hash in the manifest");
  }
  return load_tasks_jsonl(path);
}

const Task& find_task(const std::vector<Task>& tasks, std::int64_t id) {
  for (const auto& t : tasks) {
    if (t.task_id == id) return t;
  }
  throw Error(ErrorCode::kOutOfRange, "no task with id " + std::to_string(id));
}

template <class F>
int guarded(std::ostream& log, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kCorrupt:
    case ErrorCode::kFormatVersionMismatch:
      return kExitIo;
    case ErrorCode::kNonFinite:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

std::string tool_version() { return NEURPHY_VERSION; }

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("NEURPHY_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (errno != 0 || *end != '\0' || *v == '-') {
    throw Error(ErrorCode::kConfig, std::string("NEURPHY_SEED must be a non-negative integer, got '") + v + "'");
  }
  return s;
}

int cmd_generate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  return guarded(log, [&] {
    const auto result = physics::generate_task_grid(cfg.grid);
    save_tasks_jsonl(out, result.tasks);
    log << fmt::format("{} tasks written to {}; {} unbound orbit(s) skipped\n", result.tasks.size(), out.string(),
                       result.skipped_unbound);
    return kExitOk;
  });
}

int cmd_train(const fs::path& data, const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    cfg.train.validate();
    const std::vector<Task> tasks = load_tasks_jsonl(data);
    if (tasks.empty()) throw Error(ErrorCode::kDegenerate, "dataset has no tasks");
    const physics::MetaSplit split = eval::run_split(tasks, cfg);
    if (split.meta_train.empty()) throw Error(ErrorCode::kConfig, "meta-train split is empty");

    log << fmt::format("tasks {} (reference scale {}), epochs {} (reference {}), batch {} (reference {})\n",
                       tasks.size(), kReferenceTasks, cfg.train.epochs, kReferenceEpochs, cfg.train.batch_tasks,
                       kReferenceBatch);
    log << fmt::format("meta-train {} tasks, meta-test {} tasks, D={}, seed={}\n", split.meta_train.size(),
                       split.meta_test.size(), cfg.train.D, cfg.train.seed);

    const RunPaths run{out_dir};
    fs::create_directories(out_dir);
    write_file_atomic(run.config(), config_to_text(cfg));

    NeurPhyModel model(cfg.model);
    const std::size_t every = cfg.train.checkpoint_every;
    auto on_epoch = [&](std::size_t epoch, const NeurPhyModel& m, const std::vector<LossBreakdown>& history) {
      write_file_atomic(run.metrics(), metrics_csv(history, cfg.train.D));
      if (every > 0 && (epoch + 1) % every == 0) checkpoint_save(m, cfg, run.checkpoint());
      const auto& h = history.back();
      if (epoch == 0 || (epoch + 1) % 10 == 0 || epoch + 1 == cfg.train.epochs) {
        log << fmt::format("epoch {:>4}  recon {:>12.6g}  total {:>12.6g}\n", epoch + 1, h.recon, h.total) << std::flush;
      }
    };
    if (cfg.train.epochs == 0) write_file_atomic(run.metrics(), metrics_csv({}, cfg.train.D));
    try {
      train_model(model, split.meta_train, cfg.train, on_epoch);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonFinite) log << "training aborted; metrics so far kept in " << run.metrics() << "\n";
      throw;
    }
    checkpoint_save(model, cfg, run.checkpoint());

    ordered_json m;
    m["tool"] = "neurphy";
    m["version"] = tool_version();
    m["seed"] = cfg.train.seed;
    m["config"] = config_to_json(cfg);
    m["dataset"] = {{"path", fs::absolute(data).lexically_normal().string()}, {"sha256", sha256_file(data)}};
    m["config_file"] = artifact(run.config(), out_dir);
    m["checkpoint"] = artifact(run.checkpoint(), out_dir);
    m["metrics"] = ordered_json::array({artifact(run.metrics(), out_dir)});
    ordered_json train_ids = ordered_json::array(), test_ids = ordered_json::array();
    for (const auto& t : split.meta_train) train_ids.push_back(t.task_id);
    for (const auto& t : split.meta_test) test_ids.push_back(t.task_id);
    m["meta_train_tasks"] = train_ids;
    m["meta_test_tasks"] = test_ids;
    write_file_atomic(run.manifest(), m.dump(2) + "\n");
    log << "run written to " << out_dir.string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const fs::path& run_dir, const EvalOptions& options, std::ostream& log) {
  return guarded(log, [&] {
    const RunPaths run{run_dir};
    const Checkpoint ckpt = checkpoint_load(run.checkpoint());
    const RunConfig& cfg = ckpt.config;
    const std::vector<Task> tasks = run_dataset(run, options.data);
    const physics::MetaSplit split = eval::run_split(tasks, cfg);
    const std::size_t D = options.overshoot == 0 ? cfg.train.D : options.overshoot;
    const fs::path out = options.out_dir.empty() ? run_dir : options.out_dir;
    fs::create_directories(out);

    const auto r2 = eval::global_r2(ckpt.model, split.meta_train, cfg.train.n_c, options.eval_seed);
    write_file_atomic(out / "r2.csv", eval::r2_csv(r2));
    log << "R2 of r_c against global parameters (meta-train tasks)\n" << eval::r2_text(r2) << "\n";

    std::vector<eval::MseTable> mse;
    std::vector<std::pair<eval::Stage, std::vector<double>>> kl;
    for (eval::Stage stage : options.stages) {
      const auto set = eval::stage_tasks(split, stage, cfg, D, options.eval_seed);
      if (set.empty()) {
        log << "stage " << eval::to_string(stage) << ": no tasks with eligible frames, skipped\n";
        continue;
      }
      mse.push_back(eval::rollout_mse(ckpt.model, set, stage, D));
      kl.emplace_back(stage, eval::kl_report(ckpt.model, set, cfg.train, D, options.eval_seed));
      const std::string name = eval::to_string(stage);
      write_file_atomic(out / ("mse_" + name + ".csv"), eval::mse_csv({mse.back()}));
      write_file_atomic(out / ("kl_" + name + ".csv"), eval::kl_csv({kl.back()}));
    }
    log << "Prediction MSE\n" << eval::mse_text(mse) << "\n";
    log << "KL per overshoot\n" << eval::kl_text(kl);
    return kExitOk;
  });
}

int cmd_rollout(const fs::path& run_dir, std::int64_t task_id, std::size_t start, std::size_t horizon,
                const fs::path& out, std::uint64_t eval_seed, std::ostream& log) {
  return guarded(log, [&] {
    const RunPaths run{run_dir};
    const Checkpoint ckpt = checkpoint_load(run.checkpoint());
    const std::vector<Task> tasks = run_dataset(run, {});
    const Task& task = find_task(tasks, task_id);
    const physics::MetaSplit split = eval::run_split(tasks, ckpt.config);
    const bool meta_test = std::any_of(split.meta_test.begin(), split.meta_test.end(),
                                       [&](const Task& t) { return t.task_id == task_id; });
    const auto seed = derive_seed(eval_seed, {static_cast<std::uint64_t>(task_id)});
    const auto ctx = meta_test ? physics::select_contexts(task, 20, physics::ContextMode::kMetatestPrefix, seed)
                               : physics::select_contexts(task, ckpt.config.train.n_c,
                                                          physics::ContextMode::kTrainRandom, seed);
    const auto pred = predict_observations(ckpt.model, task, ctx, start, horizon);
    std::string csv = "t,true_x,true_y,pred_x,pred_y\n";
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const std::size_t t = start + k;
      const auto& x = task.observations[t];
      csv += fmt::format("{},{},{},{},{}\n", t, format_real(x[0]), format_real(x[1]), format_real(pred[k][0]),
                         format_real(pred[k][1]));
    }
    write_file_atomic(out, csv);
    log << fmt::format("{} rows written to {} (task {} is {})\n", pred.size(), out.string(), task_id,
                       meta_test ? "meta-test" : "meta-train");
    return kExitOk;
  });
}

int cmd_manifold(const fs::path& run_dir, const fs::path& out_dir, std::uint64_t eval_seed, std::ostream& log) {
  return guarded(log, [&] {
    const RunPaths run{run_dir};
    const Checkpoint ckpt = checkpoint_load(run.checkpoint());
    const std::vector<Task> tasks = run_dataset(run, {});
    const fs::path out = out_dir.empty() ? run_dir : out_dir;
    fs::create_directories(out);
    eval::export_manifold(ckpt.model, tasks, ckpt.config.train.n_c, eval_seed, out / "manifold_tasks.csv",
                          out / "manifold_frames.csv");
    log << "manifold exports written to " << out.string() << "\n";
    return kExitOk;
  });
}

int cmd_plot(const fs::path& in, const fs::path& out, const std::string& color_by, std::ostream& log) {
  return guarded(log, [&] {
    const auto table = plot::parse_csv(read_file(in));
    const auto schema = plot::detect_schema(table.header);
    write_file_atomic(out, plot::render_svg(plot::chart_from_csv(table, {color_by})));
    log << "plotted " << plot::to_string(schema) << " CSV to " << out.string() << "\n";
    return kExitOk;
  });
}

namespace {

// Config assembly shared by the subcommands: defaults, then --config items
// (files or key=value) in order, then NEURPHY_SEED, then per-key flags.
struct ConfigFlags {
  std::vector<std::string> config_items;
  std::vector<std::string> values;
  std::vector<CLI::Option*> options;
  std::vector<std::string> names;

  void attach(CLI::App& app, const std::string& section_filter) {
    app.add_option("--config", config_items, "config file(s) and/or key=value overrides, applied in order");
    const auto& keys = config_keys();
    values.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (!section_filter.empty() && keys[i].section != section_filter) continue;
      options.push_back(app.add_option("--" + keys[i].name, values[i], keys[i].help)->group(keys[i].section));
      names.push_back(keys[i].name);
    }
  }

  RunConfig build(RunConfig cfg, bool env_sets_data_seed) const {
    for (const auto& item : config_items) {
      if (item.find('=') != std::string::npos && !fs::exists(item)) {
        apply_override(cfg, item);
      } else {
        apply_config_text(cfg, read_file(item));
      }
    }
    if (auto s = env_seed()) {
      if (env_sets_data_seed) {
        cfg.grid.seed = *s;
      } else {
        set_config_value(cfg, "seed", std::to_string(*s));
      }
    }
    const auto& keys = config_keys();
    std::size_t k = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (k < names.size() && names[k] == keys[i].name) {
        if (options[k]->count() > 0) set_config_value(cfg, keys[i].name, values[i]);
        ++k;
      }
    }
    return cfg;
  }
};

void apply_grid_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "desk") return;
  if (preset == "full") {
    if (cfg.grid.system != physics::System::kPendulum) {
      throw Error(ErrorCode::kConfig, "the 'full' grid preset exists for the pendulum only");
    }
    const auto system = cfg.grid.system;
    cfg.grid = physics::full_scale_pendulum_grid();
    cfg.grid.system = system;
    return;
  }
  throw Error(ErrorCode::kConfig, "unknown grid preset '" + preset + "' (desk or full)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned latent dynamics for physical systems"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "simulate a task grid into a JSON-lines dataset");
  ConfigFlags gen_flags;
  std::string gen_grid = "desk";
  fs::path gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--grid", gen_grid, "desk or full grid preset, refined by the range keys")
      ->check(CLI::IsMember({"desk", "full"}));
  gen->add_option("--out", gen_out, "output .jsonl")->required();
  gen->add_option("--seed", gen_seed, "seed recorded in every task");
  gen_flags.attach(*gen, "physics");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
  ConfigFlags train_flags;
  fs::path train_data, train_out;
  train_cmd->add_option("--data", train_data, "dataset .jsonl")->required();
  train_cmd->add_option("--out", train_out, "run directory")->required();
  train_flags.attach(*train_cmd, "");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "R2, prediction MSE and KL tables for a run");
  fs::path eval_run;
  std::vector<std::string> eval_stages;
  EvalOptions eval_opts;
  eval_cmd->add_option("--run", eval_run, "run directory")->required();
  eval_cmd->add_option("--stage", eval_stages, "training, test, metatest20, metatest2 (default: all)")
      ->check(CLI::IsMember({"training", "test", "metatest20", "metatest2"}));
  eval_cmd->add_option("--eval-seed", eval_opts.eval_seed, "seed for contexts and sampling noise");
  eval_cmd->add_option("--overshoot", eval_opts.overshoot, "overshoot horizon of the tables (default: the run's D)");
  eval_cmd->add_option("--out", eval_opts.out_dir, "output directory (default: the run directory)");
  eval_cmd->add_option("--data", eval_opts.data, "dataset override");

  // rollout
  auto* roll = app.add_subcommand("rollout", "predict a window of one task");
  fs::path roll_run, roll_out;
  std::int64_t roll_task = 0;
  std::size_t roll_start = 1, roll_horizon = 50;
  std::uint64_t roll_seed = 0;
  roll->add_option("--run", roll_run, "run directory")->required();
  roll->add_option("--task", roll_task, "task id")->required();
  roll->add_option("--start", roll_start, "first frame t (needs t >= 1)");
  roll->add_option("--horizon", roll_horizon, "number of predicted steps");
  roll->add_option("--out", roll_out, "output CSV")->required();
  roll->add_option("--eval-seed", roll_seed, "seed for the context draw");

  // manifold
  auto* man = app.add_subcommand("manifold", "export r_c per task and z per frame as CSV");
  fs::path man_run, man_out;
  std::uint64_t man_seed = 0;
  man->add_option("--run", man_run, "run directory")->required();
  man->add_option("--out", man_out, "output directory (default: the run directory)");
  man->add_option("--eval-seed", man_seed, "seed for the context draw");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "render a CSV written by this tool as SVG");
  fs::path plot_in, plot_out;
  std::string plot_color;
  plot_cmd->add_option("--in", plot_in, "input CSV")->required();
  plot_cmd->add_option("--out", plot_out, "output SVG")->required();
  plot_cmd->add_option("--color-by", plot_color, "manifold column used for colour");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      // The preset depends on the system, so resolve the system first.
      RunConfig base;
      base.grid.system = gen_flags.build(RunConfig{}, true).grid.system;
      apply_grid_preset(base, gen_grid);
      RunConfig cfg = gen_flags.build(base, true);
      if (gen_seed) cfg.grid.seed = *gen_seed;
      return cmd_generate(cfg, gen_out, std::cout);
    }
    if (*train_cmd) return cmd_train(train_data, train_flags.build(RunConfig{}, false), train_out, std::cout);
    if (*eval_cmd) {
      if (!eval_stages.empty()) {
        eval_opts.stages.clear();
        for (const auto& s : eval_stages) eval_opts.stages.push_back(eval::stage_from_string(s));
      }
      return cmd_eval(eval_run, eval_opts, std::cout);
    }
    if (*roll) return cmd_rollout(roll_run, roll_task, roll_start, roll_horizon, roll_out, roll_seed, std::cout);
    if (*man) return cmd_manifold(man_run, man_out, man_seed, std::cout);
    if (*plot_cmd) return cmd_plot(plot_in, plot_out, plot_color, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace neurphy::cli
