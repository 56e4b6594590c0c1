#include "mmkd/trainer.hpp"

#include "mmkd/errors.hpp"
#include "mmkd/random.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mmkd {

void TrainConfig::validate(std::size_t languages) const {
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw ConfigError("warmup_frac must be in (0, 1)");
  if (batch_size == 0 || batch_size < languages) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " must be at least the number of languages (" +
                      std::to_string(languages) + ")");
  }
  if (!(peak_lr >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("learning rate and weight decay must be >= 0");
  if (max_seq_len < 5) throw ConfigError("max_seq_len too small");
  objectives.validate();
}

PreparedCorpus prepare_corpus(const CorpusSet& corpus, const Vocabulary& student_vocab,
                              const Vocabulary& teacher_vocab, std::size_t max_seq_len) {
  PreparedCorpus out;
  for (const auto& [lang, pairs] : corpus) {
    out.languages.push_back(lang);
    auto& ids = out.by_language.emplace_back();
    for (const auto& p : pairs) {
      auto src = tokenize(student_vocab, p.source);
      auto tgt = tokenize(student_vocab, p.target);
      auto teacher_src = tokenize(teacher_vocab, p.source);
      if (src.size() + tgt.size() + 3 > max_seq_len || teacher_src.size() + 2 > max_seq_len) {
        ++out.skipped;
        continue;
      }
      PreparedPair pp;
      pp.id = out.pairs.size();
      pp.concat = encode_pair(src, tgt, max_seq_len);
      pp.target = encode_single(tgt, max_seq_len);
      pp.teacher_source = encode_single(teacher_src, max_seq_len);
      pp.alignment = align_words(src, teacher_src);
      ids.push_back(pp.id);
      out.pairs.push_back(std::move(pp));
    }
  }
  return out;
}

template <typename S>
TeacherCache<S> build_teacher_cache(const Encoder<S>& teacher, const PreparedCorpus& corpus) {
  TeacherCache<S> cache;
  cache.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) cache.push_back(teacher.encode(p.teacher_source.ids, Mode::eval).value());
  return cache;
}

template <typename S>
BatchLoss<S> compute_batch_loss(const ModelBundle<S>& bundle, std::span<const PreparedPair* const> batch,
                                const ObjectiveConfig& objectives, const MaskOptions& mask, std::uint64_t seed,
                                Mode mode, const TeacherCache<S>* cache) {
  if (batch.empty()) throw ConfigError("empty batch");
  const auto& student = bundle.student_encoder;
  const auto vocab = student.config().vocab_size;
  BatchLoss<S> out;

  auto teacher_states = [&](const PreparedPair& p) {
    if (cache != nullptr) return ag::Tensor<S>::constant((*cache)[p.id]);
    return bundle.teacher_encoder.encode(p.teacher_source.ids, Mode::eval);
  };
  auto dropout_stream = [&](std::uint64_t view, std::size_t i) {
    return std::mt19937_64(derive_seed(seed, {kTagDropout, view, i}));
  };

  if (objectives.is_enabled(Objective::tlm)) {
    std::vector<ag::Tensor<S>> rows;
    std::vector<std::int64_t> targets;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto masked = apply_tlm_mask(batch[i]->concat, vocab, mask, derive_seed(seed, {kTagTlm, i}));
      if (masked.plan.empty()) continue;
      auto rng = dropout_stream(kTagTlm, i);
      auto hidden = student.encode(masked.ids, mode, &rng);
      std::vector<std::int64_t> pos(masked.plan.positions.begin(), masked.plan.positions.end());
      rows.push_back(ag::gather_rows(hidden, std::span<const std::int64_t>(pos)));
      targets.insert(targets.end(), masked.plan.original_ids.begin(), masked.plan.original_ids.end());
    }
    if (!rows.empty()) {
      auto logits = student.mlm_logits(ag::concat_rows<S>(rows));
      out.terms[0] = ag::cross_entropy(logits, std::span<const std::int64_t>(targets));
    }
  }

  if (objectives.is_enabled(Objective::xwcl)) {
    const XwclOptions opts{objectives.tau_xwcl, objectives.xwcl_sum, objectives.xwcl_cosine};
    std::vector<ag::Tensor<S>> per_pair;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto masked = apply_xwcl_mask(batch[i]->concat, vocab, mask, derive_seed(seed, {kTagXwcl, i}));
      auto rng = dropout_stream(kTagXwcl, i);
      auto hidden = student.encode(masked.ids, mode, &rng);
      per_pair.push_back(xwcl_loss(hidden, teacher_states(*batch[i]), batch[i]->alignment, masked.plan, opts).value);
    }
    auto stacked = ag::concat_rows<S>(per_pair);
    out.terms[1] = ag::scale(ag::sum(stacked), S(1) / static_cast<S>(per_pair.size()));
  }

  const bool senta = objectives.is_enabled(Objective::senta);
  const bool struca = objectives.is_enabled(Objective::struca);
  if (senta || struca) {
    std::vector<ag::Tensor<S>> student_cls;
    ag::Matrix<S> teacher_cls(static_cast<Eigen::Index>(batch.size()),
                              static_cast<Eigen::Index>(bundle.teacher_encoder.config().hidden_dim));
    const std::int64_t first[1] = {0};
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto rng = dropout_stream(kTagSelect, i);
      auto hidden = student.encode(batch[i]->target.ids, mode, &rng);
      student_cls.push_back(ag::gather_rows(hidden, std::span<const std::int64_t>(first)));
      teacher_cls.row(static_cast<Eigen::Index>(i)) = teacher_states(*batch[i]).value().row(0);
    }
    auto cs = ag::concat_rows<S>(student_cls);
    auto ct = ag::Tensor<S>::constant(std::move(teacher_cls));
    if (senta) out.terms[2] = senta_loss(bundle, cs, ct);
    if (struca) {
      out.terms[3] = struca_loss(bundle, cs, ct, objectives.tau_struca, objectives.struca_cross_entropy);
    }
  }

  LossParts parts;
  if (out.terms[0].defined()) parts.tlm = static_cast<double>(out.terms[0].item());
  if (out.terms[1].defined()) parts.xwcl = static_cast<double>(out.terms[1].item());
  if (out.terms[2].defined()) parts.senta = static_cast<double>(out.terms[2].item());
  if (out.terms[3].defined()) parts.struca = static_cast<double>(out.terms[3].item());
  out.breakdown = total_loss(parts, objectives);
  out.total = combine_losses(out.terms, objectives);
  return out;
}

Trainer::Trainer(ModelBundle<float>& bundle, const Vocabulary& student_vocab, const Vocabulary& teacher_vocab,
                 const CorpusSet& corpus, TrainConfig cfg, TrainingState state)
    : bundle_(bundle), cfg_(std::move(cfg)), state_(std::move(state)) {
  cfg_.validate(corpus.size());
  if (student_vocab.size() != bundle_.student_encoder.config().vocab_size ||
      teacher_vocab.size() != bundle_.teacher_encoder.config().vocab_size) {
    throw ConfigError("vocabulary sizes do not match the encoders");
  }
  data_ = prepare_corpus(corpus, student_vocab, teacher_vocab,
                         std::min({cfg_.max_seq_len, bundle_.student_encoder.config().max_len,
                                   bundle_.teacher_encoder.config().max_len}));
  for (std::size_t l = 0; l < data_.by_language.size(); ++l) {
    if (data_.by_language[l].empty()) {
      throw DataError("no usable pairs for language " + data_.languages[l].code());
    }
  }
  cache_ = build_teacher_cache(bundle_.teacher_encoder, data_);
  params_ = trainable_parameters(bundle_);

  steps_per_epoch_ = plan_for(0).batches.size();
  const auto total = steps_per_epoch_ * cfg_.epochs;
  if (state_.total_steps == 0) {
    state_.total_steps = total;
  } else if (state_.total_steps != total) {
    throw ConfigError("resumed state expects " + std::to_string(state_.total_steps) +
                      " steps but this configuration gives " + std::to_string(total));
  }
}

const BatchPlan& Trainer::plan_for(std::size_t epoch) {
  if (epoch != plan_epoch_) {
    CorpusSet index_sets;
    // The planner only needs sizes and language order; build a lightweight
    // stand-in keyed like the real corpus.
    for (std::size_t l = 0; l < data_.languages.size(); ++l) {
      index_sets[data_.languages[l]].resize(data_.by_language[l].size());
    }
    plan_ = plan_balanced_batches(index_sets, cfg_.batch_size, derive_seed(cfg_.seed, {kTagShuffle, epoch}));
    plan_epoch_ = epoch;
    if (steps_per_epoch_ != 0 && plan_.batches.size() != steps_per_epoch_) {
      plan_.batches.resize(std::min(plan_.batches.size(), steps_per_epoch_));
    }
  }
  return plan_;
}

StepRecord Trainer::step() {
  if (finished()) throw ConfigError("training already finished");
  const auto epoch = state_.step / steps_per_epoch_;
  const auto& plan = plan_for(epoch);
  const auto& refs = plan.batches.at(state_.step % steps_per_epoch_);
  std::vector<const PreparedPair*> batch;
  batch.reserve(refs.size());
  for (const auto& r : refs) batch.push_back(&data_.pairs[data_.by_language[r.language][r.index]]);

  zero_grads(params_);
  const auto seed = derive_seed(cfg_.seed, {state_.step});
  auto loss = compute_batch_loss<float>(bundle_, batch, cfg_.objectives, cfg_.mask, seed, Mode::train, &cache_);
  if (!loss.breakdown.finite()) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state_.step + 1 << ": tlm=" << loss.breakdown.tlm
        << " xwcl=" << loss.breakdown.xwcl << " senta=" << loss.breakdown.senta
        << " struca=" << loss.breakdown.struca;
    throw NumericError(msg.str());
  }
  const double lr = lr_at_step(state_.step + 1, state_.total_steps, cfg_.peak_lr, cfg_.warmup_frac);
  if (cfg_.objectives.any_enabled()) {
    ag::backward(loss.total);
    clip_grad_norm(params_, cfg_.grad_clip);
    adamw_step(params_, state_.adam, lr, cfg_.adam());
  }
  ++state_.step;
  StepRecord rec{state_.step, loss.breakdown, lr};
  state_.history.push_back(rec);
  return rec;
}

void Trainer::run(const Hooks& hooks) {
  while (!finished()) {
    const auto rec = step();
    if (hooks.on_step) hooks.on_step(rec);
    if (state_.step % steps_per_epoch_ == 0) {
      const auto epoch = state_.step / steps_per_epoch_ - 1;
      double sum = 0;
      for (std::size_t i = state_.history.size() - steps_per_epoch_; i < state_.history.size(); ++i) {
        sum += state_.history[i].loss.total;
      }
      const double mean = sum / static_cast<double>(steps_per_epoch_);
      const bool best = mean < state_.best_epoch_total;
      if (best) state_.best_epoch_total = mean;
      if (hooks.on_epoch) hooks.on_epoch(epoch, mean, best);
    }
  }
}

void write_log_line(std::ostream& out, const StepRecord& rec) {
  std::ostringstream line;
  line << std::setprecision(9) << rec.step << '\t' << rec.loss.tlm << '\t' << rec.loss.xwcl << '\t'
       << rec.loss.senta << '\t' << rec.loss.struca << '\t' << rec.loss.total << '\t' << rec.lr << '\n';
  out << line.str();
}

GradCheckReport grad_check(const std::function<ag::Tensor<double>()>& loss, const ModelBundle<double>& bundle,
                           std::size_t probe_count, double fd_step, std::uint64_t seed, double min_grad) {
  const auto student = trainable_parameters(bundle);
  const auto frozen = teacher_parameters(bundle);
  zero_grads(student);
  zero_grads(frozen);
  ag::backward(loss());

  GradCheckReport report;
  for (const auto& p : frozen) {
    if (p.tensor.has_grad()) {
      report.teacher_grad_max_abs = std::max(report.teacher_grad_max_abs, p.tensor.grad().cwiseAbs().maxCoeff());
    }
  }

  // Probe entries whose gradient is large enough for central differences to
  // resolve; below `min_grad` round-off in the loss dominates the estimate.
  // Falls back to every entry when nothing clears the bar.
  std::vector<std::pair<std::size_t, Eigen::Index>> candidates, everything;
  for (std::size_t p = 0; p < student.size(); ++p) {
    const auto& g = student[p].tensor.grad();
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      everything.emplace_back(p, i);
      if (std::abs(g.data()[i]) >= min_grad) candidates.emplace_back(p, i);
    }
  }
  if (candidates.empty()) candidates = std::move(everything);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  for (std::size_t k = 0; k < probe_count; ++k) {
    const auto [p, idx] = candidates[pick(rng)];
    const auto& named = student[p];
    auto param = named.tensor;
    const auto& g = param.grad();
    const double analytic = g.data()[idx];
    double& value = param.mutable_value().data()[idx];
    const double saved = value;
    auto at = [&](double offset) {
      value = saved + offset;
      return loss().item();
    };
    // Fourth-order central stencil.
    const double numeric =
        (at(-2 * fd_step) - 8 * at(-fd_step) + 8 * at(fd_step) - at(2 * fd_step)) / (12.0 * fd_step);
    value = saved;
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic - numeric) / denom;
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
      report.worst_parameter = named.name;
    }
    ++report.probes;
  }
  zero_grads(student);
  return report;
}

template TeacherCache<float> build_teacher_cache(const Encoder<float>&, const PreparedCorpus&);
template TeacherCache<double> build_teacher_cache(const Encoder<double>&, const PreparedCorpus&);
template BatchLoss<float> compute_batch_loss(const ModelBundle<float>&, std::span<const PreparedPair* const>,
                                             const ObjectiveConfig&, const MaskOptions&, std::uint64_t, Mode,
                                             const TeacherCache<float>*);
template BatchLoss<double> compute_batch_loss(const ModelBundle<double>&, std::span<const PreparedPair* const>,
                                              const ObjectiveConfig&, const MaskOptions&, std::uint64_t, Mode,
                                              const TeacherCache<double>*);

}  // namespace mmkd
