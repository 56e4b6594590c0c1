// Command-line driver for the distillation pipeline.

#include "CLI11.hpp"

#include "mmkd/config.hpp"
#include "mmkd/errors.hpp"
#include "mmkd/pipeline.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Run seed (overrides run.seed)");
  cmd->add_option("--out", c.out, "Output directory (overrides run.out_dir)");
  cmd->add_option("--set", c.sets, "Override any key: section.key=value (repeatable)");
}

mmkd::RunConfig resolve(const Common& c, mmkd::ConfigOverrides extra = {}) {
  mmkd::ConfigOverrides overrides;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw mmkd::ConfigError("--set expects section.key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed) overrides.emplace_back("run.seed", std::to_string(*c.seed));
  if (!c.out.empty()) overrides.emplace_back("run.out_dir", c.out);
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  std::optional<std::filesystem::path> path;
  if (!c.config.empty()) path = c.config;
  return mmkd::load_run_config(path, overrides);
}

void print_rows(const std::vector<mmkd::EvalRow>& rows) {
  std::cout << "model\tlang\tother\tn\tp_at_1_forward\tp_at_1_backward\tintra\tinter\tratio\n";
  for (const auto& r : rows) {
    std::cout << r.model << '\t' << r.lang.code() << '\t' << r.other.code() << '\t' << r.n << '\t'
              << r.p_at_1_forward << '\t' << r.p_at_1_backward << '\t' << r.stats.intra << '\t' << r.stats.inter
              << '\t' << r.stats.ratio << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher-student distillation of cross-lingual sentence encoders"};
  app.require_subcommand(1);

  Common prepare_opts, pretrain_opts, train_opts, eval_opts, viz_opts;
  auto* prepare = app.add_subcommand("prepare", "Filter, prune and split the corpus; build vocabularies");
  add_common(prepare, prepare_opts);

  auto* pretrain = app.add_subcommand("pretrain-teacher", "Masked-LM pretraining of the source-language teacher");
  add_common(pretrain, pretrain_opts);
  std::size_t pretrain_every = 100;
  pretrain->add_option("--log-every", pretrain_every, "Progress line interval on stderr (0 = silent)");

  auto* train = app.add_subcommand("train", "Distil the student from the frozen teacher");
  add_common(train, train_opts);
  std::vector<std::string> disabled;
  std::optional<std::size_t> epochs, batch_size;
  bool resume = false;
  train->add_option("--disable", disabled, "Objective to switch off: TLM, XWCL, SentA or StrucA (repeatable)");
  train->add_option("--epochs", epochs, "Training epochs (overrides train.epochs)");
  train->add_option("--batch-size", batch_size, "Batch size (overrides train.batch_size)");
  train->add_flag("--resume", resume, "Continue from the latest student checkpoint");

  auto* eval = app.add_subcommand("eval", "Held-out retrieval and cluster statistics");
  add_common(eval, eval_opts);
  std::string eval_model = "student";
  std::string eval_checkpoint;
  bool baseline = false;
  eval->add_option("--model", eval_model, "student or teacher")->check(CLI::IsMember({"student", "teacher"}));
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to evaluate instead of the run's own");
  eval->add_flag("--baseline", baseline, "Add rows for the untrained student");

  auto* viz = app.add_subcommand("viz", "2-D projection of shared held-out sentences in every language");
  add_common(viz, viz_opts);
  std::optional<std::size_t> sentences;
  std::string viz_checkpoint;
  viz->add_option("--sentences", sentences, "Sentences per language (overrides eval.viz_sentences)");
  viz->add_option("--checkpoint", viz_checkpoint, "Student checkpoint to use instead of the run's own");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*prepare) {
      const auto cfg = resolve(prepare_opts);
      std::exception_ptr failure;
      mmkd::Manifest manifest;
      try {
        manifest = mmkd::cmd_prepare(cfg);
      } catch (const mmkd::DataError&) {
        failure = std::current_exception();
        const mmkd::RunPaths paths(cfg.out_dir);
        if (std::filesystem::exists(paths.manifest)) manifest = mmkd::read_manifest(paths.manifest);
      }
      std::cout << "lang\traw\tfiltered\tpruned\ttrain\theldout\n";
      for (const auto& r : manifest) {
        std::cout << r.lang.code() << '\t' << r.raw << '\t' << r.filtered << '\t' << r.pruned << '\t' << r.train
                  << '\t' << r.heldout << '\n';
      }
      if (failure) std::rethrow_exception(failure);
    } else if (*pretrain) {
      const auto cfg = resolve(pretrain_opts);
      const auto s = mmkd::cmd_pretrain_teacher(cfg, [&](std::size_t step, double loss, double lr) {
        if (pretrain_every > 0 && step % pretrain_every == 0) {
          std::cerr << "step " << step << " loss " << loss << " lr " << lr << '\n';
        }
      });
      std::cout << "steps\t" << s.steps << "\nmlm_loss_before\t" << s.initial_loss << "\nmlm_loss_after\t"
                << s.final_loss << '\n';
    } else if (*train) {
      mmkd::ConfigOverrides extra;
      if (epochs) extra.emplace_back("train.epochs", std::to_string(*epochs));
      if (batch_size) extra.emplace_back("train.batch_size", std::to_string(*batch_size));
      const auto cfg = resolve(train_opts, extra);
      mmkd::TrainOptions opts;
      for (const auto& d : disabled) opts.disable.push_back(mmkd::parse_objective(d));
      opts.resume = resume;
      std::cout << mmkd::kLogHeader << '\n';
      opts.on_step = [](const mmkd::StepRecord& rec) {
        mmkd::write_log_line(std::cout, rec);
        std::cout.flush();
      };
      const auto s = mmkd::cmd_train(cfg, opts);
      if (s.skipped > 0) std::cerr << s.skipped << " over-length pairs were left out\n";
    } else if (*eval) {
      const auto cfg = resolve(eval_opts);
      mmkd::EvalOptions opts;
      opts.model = eval_model == "teacher" ? mmkd::EvalModel::teacher : mmkd::EvalModel::student;
      if (!eval_checkpoint.empty()) opts.checkpoint = eval_checkpoint;
      opts.baseline = baseline;
      const auto report = mmkd::cmd_eval(cfg, opts);
      print_rows(report.languages);
      if (!report.cross.empty()) {
        std::cout << '\n';
        print_rows(report.cross);
      }
    } else if (*viz) {
      const auto cfg = resolve(viz_opts);
      std::optional<std::filesystem::path> ckpt;
      if (!viz_checkpoint.empty()) ckpt = viz_checkpoint;
      const auto set = mmkd::cmd_viz(cfg, sentences.value_or(cfg.eval.viz_sentences), ckpt);
      std::cout << "wrote " << set.size() << " rows to " << mmkd::RunPaths(cfg.out_dir).viz.string() << '\n';
    }
  } catch (const mmkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const mmkd::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const mmkd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  }
  return kOk;
}
