#include "mmkd/pipeline.hpp"

#include "mmkd/checkpoint.hpp"
#include "mmkd/errors.hpp"
#include "mmkd/pretrain.hpp"
#include "mmkd/random.hpp"
#include "mmkd/tokenization.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mmkd {

namespace fs = std::filesystem;

RunPaths::RunPaths(fs::path o)
    : out(std::move(o)),
      lock(out / ".lock"),
      config(out / "config.ini"),
      data_dir(out / "data"),
      manifest(out / "data" / "manifest.tsv"),
      teacher_vocab(out / "vocab.teacher.txt"),
      student_vocab(out / "vocab.student.txt"),
      teacher_checkpoint(out / "teacher.ckpt"),
      pretrain_log(out / "pretrain_log.tsv"),
      student_checkpoint(out / "student.ckpt"),
      train_log(out / "train_log.tsv"),
      eval_report(out / "eval.tsv"),
      eval_cross_report(out / "eval_cross.tsv"),
      viz(out / "viz.tsv") {}

fs::path RunPaths::train_file(const LanguageId& lang) const { return data_dir / (lang.code() + ".train.tsv"); }
fs::path RunPaths::heldout_file(const LanguageId& lang) const { return data_dir / (lang.code() + ".heldout.tsv"); }
fs::path RunPaths::epoch_checkpoint(std::size_t epoch) const {
  return out / ("student_epoch" + std::to_string(epoch) + ".ckpt");
}

namespace {

/// True when the lock names a process that no longer exists.
bool lock_is_stale(const fs::path& path) {
  std::ifstream in(path);
  long pid = 0;
  if (!(in >> pid) || pid <= 0) return false;
  return ::kill(static_cast<pid_t>(pid), 0) != 0 && errno == ESRCH;
}

}  // namespace

RunLock::RunLock(const fs::path& out) : path_(out / ".lock") {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory " + out.string() + ": " + ec.message());
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0 && errno == EEXIST && lock_is_stale(path_)) {
    fs::remove(path_, ec);
    fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  }
  if (fd < 0) {
    if (errno == EEXIST) {
      throw ConfigError("output directory " + out.string() + " is in use (remove " + path_.string() +
                        " if no other command is running)");
    }
    throw ConfigError("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

constexpr const char* kManifestHeader = "lang\traw\tfiltered\tpruned\ttrain\theldout";
constexpr const char* kEvalHeader = "model\tlang\tother\tn\tp_at_1_forward\tp_at_1_backward\tintra\tinter\tratio";

void write_text_atomic(const fs::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << text;
    if (!out) throw DataError("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

void require_file(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw DataError("missing " + path.string() + " (" + hint + ")");
}

std::vector<LanguageId> target_languages(const RunConfig& cfg) {
  std::vector<LanguageId> out;
  if (cfg.synthetic.enabled) {
    for (const auto& l : cfg.synthetic.languages) out.emplace_back(l);
  } else {
    for (const auto& f : cfg.corpus.files) out.push_back(f.lang);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Corpus raw_pairs(const RunConfig& cfg, const LanguageId& lang) {
  if (cfg.synthetic.enabled) {
    const auto& names = cfg.synthetic.languages;
    const auto index = static_cast<std::size_t>(std::find(names.begin(), names.end(), lang.code()) - names.begin());
    SyntheticConfig sc;
    sc.lang = lang;
    sc.vocab_size = cfg.synthetic.vocab_size;
    sc.min_len = cfg.synthetic.min_len;
    sc.max_len = cfg.synthetic.max_len;
    sc.pair_count = cfg.synthetic.pair_count;
    sc.source_seed = synthetic_source_seed(cfg);
    sc.bijection_seed = synthetic_bijection_seed(cfg, index);
    sc.reorder = cfg.synthetic.reorder;
    sc.successors = cfg.synthetic.successors;
    sc.coherence = cfg.synthetic.coherence;
    // The run's own length filter is applied afterwards like for any corpus.
    sc.limits = {0, std::numeric_limits<std::size_t>::max()};
    return generate_synthetic_parallel(sc);
  }
  for (const auto& f : cfg.corpus.files) {
    if (f.lang == lang) {
      if (!fs::exists(f.path)) throw DataError("corpus file " + f.path.string() + " does not exist");
      return load_parallel_tsv(f.path, lang);
    }
  }
  throw ConfigError("no corpus file for language " + lang.code());
}

/// Same seeded permutation for every language, so multi-way corpora keep
/// their rows aligned across languages.
std::pair<Corpus, Corpus> split_heldout(const Corpus& pairs, std::size_t heldout, std::uint64_t seed) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(heldout, order.size())));
  std::sort(held.begin(), held.end());
  Corpus train, test;
  std::size_t h = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (h < held.size() && held[h] == i) {
      test.push_back(pairs[i]);
      ++h;
    } else {
      train.push_back(pairs[i]);
    }
  }
  return {train, test};
}

std::vector<std::string> distinct_sources(const CorpusSet& corpus) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& [lang, pairs] : corpus) {
    for (const auto& p : pairs) {
      if (seen.insert(p.source).second) out.push_back(p.source);
    }
  }
  return out;
}

Vocabulary load_vocab(const fs::path& path, std::size_t chunk) {
  require_file(path, "run prepare first");
  return Vocabulary::load(path, chunk);
}

EncoderConfig sized(EncoderConfig enc, const Vocabulary& vocab) {
  enc.vocab_size = vocab.size();
  return enc;
}

Encoder<float> load_teacher(const RunConfig& cfg, const RunPaths& paths, const Vocabulary& teacher_vocab) {
  require_file(paths.teacher_checkpoint, "run pretrain-teacher first");
  const auto expected = sized(cfg.teacher.encoder, teacher_vocab);
  return load_encoder_checkpoint(paths.teacher_checkpoint, &expected);
}

struct Sides {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

Sides sides(const Corpus& pairs) {
  Sides s;
  for (const auto& p : pairs) {
    s.source.push_back(p.source);
    s.target.push_back(p.target);
  }
  return s;
}

EvalRow compare(const std::string& model, const LanguageId& lang, const LanguageId& other, const EmbeddingSet& a,
                const EmbeddingSet& b) {
  EvalRow row;
  row.model = model;
  row.lang = lang;
  row.other = other;
  row.n = a.size();
  std::tie(row.p_at_1_forward, row.p_at_1_backward) = retrieval_accuracy(a, b);
  const EmbeddingSet both[2] = {a, b};
  row.stats = cluster_stats(concat_sets(both));
  return row;
}

/// Held-out sentences present in every listed language: their sources in
/// the first language's order, and each language's translation.
struct SharedSample {
  std::vector<std::string> sources;
  std::map<LanguageId, std::vector<std::string>> targets;
};

SharedSample shared_sample(const CorpusSet& heldout, const std::vector<LanguageId>& langs) {
  SharedSample out;
  if (langs.empty()) return out;
  std::map<LanguageId, std::unordered_map<std::string, std::string>> lookup;
  for (const auto& l : langs) {
    auto& m = lookup[l];
    for (const auto& p : heldout.at(l)) m.emplace(p.source, p.target);
  }
  std::unordered_set<std::string> seen;
  for (const auto& p : heldout.at(langs.front())) {
    if (!seen.insert(p.source).second) continue;
    const bool everywhere = std::all_of(langs.begin(), langs.end(),
                                        [&](const LanguageId& l) { return lookup[l].count(p.source) > 0; });
    if (!everywhere) continue;
    out.sources.push_back(p.source);
    for (const auto& l : langs) out.targets[l].push_back(lookup[l].at(p.source));
  }
  return out;
}

void write_rows(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << kEvalHeader << '\n' << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.model << '\t' << r.lang.code() << '\t' << r.other.code() << '\t' << r.n << '\t' << r.p_at_1_forward
        << '\t' << r.p_at_1_backward << '\t' << r.stats.intra << '\t' << r.stats.inter << '\t' << r.stats.ratio
        << '\n';
  }
}

}  // namespace

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& r : manifest) {
    out << r.lang.code() << '\t' << r.raw << '\t' << r.filtered << '\t' << r.pruned << '\t' << r.train << '\t'
        << r.heldout << '\n';
  }
  write_text_atomic(path, out.str());
}

Manifest read_manifest(const fs::path& path) {
  require_file(path, "run prepare first");
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) throw DataError("bad manifest header in " + path.string());
  Manifest out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string code;
    ManifestRow r;
    if (!std::getline(fields, code, '\t') || !(fields >> r.raw >> r.filtered >> r.pruned >> r.train >> r.heldout)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed manifest row");
    }
    r.lang = LanguageId(code);
    out.push_back(r);
  }
  return out;
}

PreparedData load_prepared(const RunConfig& cfg) {
  const RunPaths paths(cfg.out_dir);
  const auto manifest = read_manifest(paths.manifest);
  const auto expected = target_languages(cfg);
  std::vector<LanguageId> listed;
  for (const auto& r : manifest) listed.push_back(r.lang);
  if (listed != expected) throw ConfigError("prepared data languages differ from the config; rerun prepare");
  PreparedData data;
  for (const auto& r : manifest) {
    require_file(paths.train_file(r.lang), "run prepare first");
    require_file(paths.heldout_file(r.lang), "run prepare first");
    data.train[r.lang] = r.train > 0 ? load_parallel_tsv(paths.train_file(r.lang), r.lang) : Corpus{};
    data.heldout[r.lang] = r.heldout > 0 ? load_parallel_tsv(paths.heldout_file(r.lang), r.lang) : Corpus{};
    if (data.train[r.lang].size() != r.train || data.heldout[r.lang].size() != r.heldout) {
      throw DataError("prepared files for " + r.lang.code() + " disagree with the manifest");
    }
  }
  data.sources = distinct_sources(data.train);
  return data;
}

CorpusSet training_corpus(const RunConfig& cfg, const PreparedData& data) {
  CorpusSet out = data.train;
  if (cfg.corpus.source_copy) {
    const LanguageId src(cfg.corpus.source_lang);
    Corpus copies;
    copies.reserve(data.sources.size());
    for (const auto& s : data.sources) copies.push_back({s, s, src});
    out[src] = std::move(copies);
  }
  return out;
}

BundleConfig bundle_config(const RunConfig& cfg, const Vocabulary& student_vocab, const Vocabulary& teacher_vocab) {
  BundleConfig b;
  b.teacher = sized(cfg.teacher.encoder, teacher_vocab);
  b.student = sized(cfg.student.encoder, student_vocab);
  b.head = cfg.head;
  b.head.in_dim = cfg.student.encoder.hidden_dim;
  b.head_seed = cfg.head_seed;
  b.teacher_heads_trainable = cfg.teacher_heads_trainable;
  return b;
}

Encoder<float> baseline_student(const RunConfig& cfg, const Vocabulary& student_vocab) {
  return Encoder<float>(sized(cfg.student.encoder, student_vocab), false);
}

Manifest cmd_prepare(const RunConfig& cfg) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  const auto langs = target_languages(cfg);
  // Read every input before touching the output directory.
  std::map<LanguageId, Corpus> raw;
  for (const auto& l : langs) raw[l] = raw_pairs(cfg, l);

  const RunLock lock(paths.out);
  fs::create_directories(paths.data_dir);
  write_text_atomic(paths.config, to_ini(cfg));

  // Both sides must also fit a single encoder pass.
  LengthFilter limits = cfg.corpus.limits;
  const auto fit = std::min(cfg.teacher.encoder.max_len, cfg.student.encoder.max_len);
  limits.max_tokens = std::min(limits.max_tokens, fit >= 2 ? fit - 2 : 0);
  const TokenCounter count = [&](std::string_view text) {
    return std::max(count_tokens(text, cfg.teacher.chunk), count_tokens(text, cfg.student.chunk));
  };

  Manifest manifest;
  CorpusSet train, heldout;
  for (const auto& l : langs) {
    ManifestRow row;
    row.lang = l;
    row.raw = raw[l].size();
    const auto filtered = filter_by_length(raw[l], count, limits);
    row.filtered = filtered.size();
    const auto pruned =
        cfg.corpus.prune > 0 ? prune(filtered, cfg.corpus.prune, derive_seed(cfg.seed, {kTagPrune, 0})) : filtered;
    row.pruned = pruned.size();
    auto [tr, te] = split_heldout(pruned, cfg.corpus.heldout, derive_seed(cfg.seed, {kTagPrune, 1}));
    row.train = tr.size();
    row.heldout = te.size();
    save_parallel_tsv(paths.train_file(l), tr);
    save_parallel_tsv(paths.heldout_file(l), te);
    train[l] = std::move(tr);
    heldout[l] = std::move(te);
    manifest.push_back(row);
  }
  write_manifest(paths.manifest, manifest);

  for (const auto& row : manifest) {
    if (row.train == 0 || row.heldout < std::min<std::size_t>(cfg.corpus.heldout, 1)) {
      throw DataError("language " + row.lang.code() + " keeps " + std::to_string(row.pruned) +
                      " pairs after filtering, too few for " + std::to_string(cfg.corpus.heldout) +
                      " held-out pairs plus training data");
    }
  }

  const auto sources = distinct_sources(train);
  std::vector<std::string> all = sources;
  for (const auto& [l, pairs] : train) {
    for (const auto& p : pairs) all.push_back(p.target);
  }
  build_vocab(sources, cfg.teacher.vocab_max, cfg.teacher.chunk).save(paths.teacher_vocab);
  build_vocab(all, cfg.student.vocab_max, cfg.student.chunk).save(paths.student_vocab);
  return manifest;
}

PretrainSummary cmd_pretrain_teacher(const RunConfig& cfg,
                                     const std::function<void(std::size_t, double, double)>& on_step) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  const auto data = load_prepared(cfg);
  const auto vocab = load_vocab(paths.teacher_vocab, cfg.teacher.chunk);
  if (data.sources.empty()) throw DataError("no source sentences to pretrain on");

  const RunLock lock(paths.out);
  const auto enc = sized(cfg.teacher.encoder, vocab);
  std::ostringstream log;
  log << "step\tloss\tlr\n" << std::setprecision(9);
  const auto result = pretrain_teacher(enc, data.sources, vocab, cfg.pretrain,
                                       [&](std::size_t step, double loss, double lr) {
                                         log << step << '\t' << loss << '\t' << lr << '\n';
                                         if (on_step) on_step(step, loss, lr);
                                       });
  save_encoder_checkpoint(paths.teacher_checkpoint, result.teacher);
  write_text_atomic(paths.pretrain_log, log.str());

  const auto probe_seed = derive_seed(cfg.seed, {kTagMlm, 1});
  PretrainSummary s;
  s.steps = result.losses.size();
  s.initial_loss = mlm_loss(Encoder<float>(enc, false), data.sources, vocab, cfg.pretrain.mask, probe_seed);
  s.final_loss = mlm_loss(result.teacher, data.sources, vocab, cfg.pretrain.mask, probe_seed);
  return s;
}

TrainSummary cmd_train(const RunConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  TrainConfig tc = cfg.train;
  for (auto o : options.disable) tc.objectives.set_enabled(o, false);
  if (!tc.objectives.any_enabled()) throw ConfigError("refusing to train with every objective disabled");

  const RunPaths paths(cfg.out_dir);
  const auto data = load_prepared(cfg);
  const auto corpus = training_corpus(cfg, data);
  tc.validate(corpus.size());
  const auto teacher_vocab = load_vocab(paths.teacher_vocab, cfg.teacher.chunk);
  const auto student_vocab = load_vocab(paths.student_vocab, cfg.student.chunk);
  const auto bcfg = bundle_config(cfg, student_vocab, teacher_vocab);

  std::optional<LoadedBundle> resumed;
  std::optional<ModelBundle<float>> fresh;
  if (options.resume) {
    require_file(paths.student_checkpoint, "nothing to resume");
    resumed.emplace(load_bundle_checkpoint(paths.student_checkpoint, &bcfg));
    if (!(resumed->train == tc)) throw ConfigError("training settings differ from the checkpoint being resumed");
  } else {
    fresh.emplace(bcfg, load_teacher(cfg, paths, teacher_vocab));
  }
  ModelBundle<float>& bundle = resumed ? resumed->bundle : *fresh;

  const RunLock lock(paths.out);
  Trainer trainer(bundle, student_vocab, teacher_vocab, corpus, tc, resumed ? resumed->state : TrainingState{});

  std::ofstream log(paths.train_log, std::ios::trunc);
  if (!log) throw DataError("cannot write " + paths.train_log.string());
  log << kLogHeader << '\n';
  for (const auto& rec : trainer.state().history) write_log_line(log, rec);
  log.flush();

  trainer.run({[&](const StepRecord& rec) {
                 write_log_line(log, rec);
                 log.flush();
                 if (options.on_step) options.on_step(rec);
               },
               [&](std::size_t epoch, double, bool) {
                 save_bundle_checkpoint(paths.epoch_checkpoint(epoch + 1), bundle, trainer.config(), trainer.state());
               }});
  save_bundle_checkpoint(paths.student_checkpoint, bundle, trainer.config(), trainer.state());

  TrainSummary s;
  s.steps = trainer.state().step;
  s.skipped = trainer.skipped();
  s.history = trainer.state().history;
  return s;
}

void write_eval_report(const fs::path& path, const std::vector<EvalRow>& rows) {
  std::ostringstream out;
  write_rows(out, rows);
  write_text_atomic(path, out.str());
}

EvalReport cmd_eval(const RunConfig& cfg, const EvalOptions& options) {
  cfg.validate();
  const RunPaths paths(cfg.out_dir);
  const auto data = load_prepared(cfg);
  for (const auto& [l, pairs] : data.heldout) {
    if (pairs.empty()) throw DataError("no held-out pairs for " + l.code());
  }
  const LanguageId src(cfg.corpus.source_lang);
  EvalReport report;

  if (options.model == EvalModel::teacher) {
    const auto vocab = load_vocab(paths.teacher_vocab, cfg.teacher.chunk);
    const auto expected = sized(cfg.teacher.encoder, vocab);
    const auto teacher = options.checkpoint ? load_encoder_checkpoint(*options.checkpoint, &expected)
                                            : load_teacher(cfg, paths, vocab);
    const RunLock lock(paths.out);
    for (const auto& [l, pairs] : data.heldout) {
      const auto s = sides(pairs);
      const auto a = embed_sentences(teacher, s.source, vocab, src);
      report.languages.push_back(compare("teacher", l, src, a, a));
    }
    write_eval_report(paths.eval_report, report.languages);
    return report;
  }

  const auto vocab = load_vocab(paths.student_vocab, cfg.student.chunk);
  const auto ckpt = options.checkpoint.value_or(paths.student_checkpoint);
  require_file(ckpt, "run train first or pass a checkpoint");
  const auto teacher_vocab = load_vocab(paths.teacher_vocab, cfg.teacher.chunk);
  const auto bcfg = bundle_config(cfg, vocab, teacher_vocab);
  auto loaded = load_bundle_checkpoint(ckpt, &bcfg);

  std::vector<std::pair<std::string, const Encoder<float>*>> models{{"student", &loaded.bundle.student_encoder}};
  std::optional<Encoder<float>> baseline;
  if (options.baseline) {
    baseline.emplace(baseline_student(cfg, vocab));
    models.emplace_back("baseline", &*baseline);
  }

  const RunLock lock(paths.out);
  std::vector<LanguageId> langs;
  for (const auto& [l, pairs] : data.heldout) langs.push_back(l);
  for (const auto& [name, enc] : models) {
    for (const auto& l : langs) {
      const auto s = sides(data.heldout.at(l));
      report.languages.push_back(compare(name, l, src, embed_sentences(*enc, s.target, vocab, l),
                                         embed_sentences(*enc, s.source, vocab, src)));
    }
    for (std::size_t i = 0; i < langs.size(); ++i) {
      for (std::size_t j = i + 1; j < langs.size(); ++j) {
        const auto shared = shared_sample(data.heldout, {langs[i], langs[j]});
        if (shared.sources.size() < 2) continue;
        report.cross.push_back(compare(name, langs[i], langs[j],
                                       embed_sentences(*enc, shared.targets.at(langs[i]), vocab, langs[i]),
                                       embed_sentences(*enc, shared.targets.at(langs[j]), vocab, langs[j])));
      }
    }
  }
  write_eval_report(paths.eval_report, report.languages);
  if (!report.cross.empty()) write_eval_report(paths.eval_cross_report, report.cross);
  return report;
}

EmbeddingSet cmd_viz(const RunConfig& cfg, std::size_t n, const std::optional<fs::path>& checkpoint) {
  cfg.validate();
  if (n == 0) throw ConfigError("viz needs at least one sentence");
  const RunPaths paths(cfg.out_dir);
  const auto data = load_prepared(cfg);
  const auto vocab = load_vocab(paths.student_vocab, cfg.student.chunk);
  const auto teacher_vocab = load_vocab(paths.teacher_vocab, cfg.teacher.chunk);
  const auto ckpt = checkpoint.value_or(paths.student_checkpoint);
  require_file(ckpt, "run train first or pass a checkpoint");
  const auto bcfg = bundle_config(cfg, vocab, teacher_vocab);
  const auto loaded = load_bundle_checkpoint(ckpt, &bcfg);
  const auto& student = loaded.bundle.student_encoder;

  std::vector<LanguageId> langs;
  for (const auto& [l, pairs] : data.heldout) langs.push_back(l);
  auto shared = shared_sample(data.heldout, langs);
  if (shared.sources.size() < n) {
    throw DataError("only " + std::to_string(shared.sources.size()) + " held-out sentences are shared by every language, " +
                    std::to_string(n) + " requested");
  }
  std::vector<std::size_t> pick(shared.sources.size());
  std::iota(pick.begin(), pick.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg.seed, {kTagSelect, 100}));
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(n);
  auto chosen = [&](const std::vector<std::string>& texts) {
    std::vector<std::string> out;
    for (auto i : pick) out.push_back(texts[i]);
    return out;
  };

  const RunLock lock(paths.out);
  std::vector<EmbeddingSet> sets;
  for (const auto& l : langs) sets.push_back(embed_sentences(student, chosen(shared.targets.at(l)), vocab, l));
  sets.push_back(embed_sentences(student, chosen(shared.sources), vocab, LanguageId(cfg.corpus.source_lang)));
  const auto projected = project_2d(concat_sets(sets));
  export_embeddings(projected, paths.viz);
  return projected;
}

}  // namespace mmkd
