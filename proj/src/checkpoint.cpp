#include "mmkd/checkpoint.hpp"

#include "mmkd/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace mmkd {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "MMKD-CHECKPOINT v1";

json to_json(const EncoderConfig& c) {
  return {{"layers", c.layers},     {"hidden_dim", c.hidden_dim}, {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},   {"max_len", c.max_len},       {"vocab_size", c.vocab_size},
          {"seed", c.seed},         {"dropout", c.dropout}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

json to_json(const BundleConfig& c) {
  return {{"teacher", to_json(c.teacher)},
          {"student", to_json(c.student)},
          {"head", {{"in_dim", c.head.in_dim}, {"mid_dim", c.head.mid_dim}, {"out_dim", c.head.out_dim}}},
          {"head_seed", c.head_seed},
          {"teacher_heads_trainable", c.teacher_heads_trainable}};
}

BundleConfig bundle_from_json(const json& j) {
  BundleConfig c;
  c.teacher = encoder_from_json(j.at("teacher"));
  c.student = encoder_from_json(j.at("student"));
  const auto& h = j.at("head");
  c.head = {h.at("in_dim").get<std::size_t>(), h.at("mid_dim").get<std::size_t>(), h.at("out_dim").get<std::size_t>()};
  c.head_seed = j.at("head_seed").get<std::uint64_t>();
  c.teacher_heads_trainable = j.at("teacher_heads_trainable").get<bool>();
  return c;
}

json to_json(const TrainConfig& c) {
  json enabled = json::array();
  for (auto o : kAllObjectives) {
    if (c.objectives.is_enabled(o)) enabled.push_back(std::string(to_string(o)));
  }
  return {{"peak_lr", c.peak_lr},
          {"weight_decay", c.weight_decay},
          {"warmup_frac", c.warmup_frac},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"max_seq_len", c.max_seq_len},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"grad_clip", c.grad_clip},
          {"objectives",
           {{"tau_xwcl", c.objectives.tau_xwcl},
            {"tau_struca", c.objectives.tau_struca},
            {"alpha", c.objectives.alpha},
            {"enabled", enabled},
            {"xwcl_sum", c.objectives.xwcl_sum},
            {"xwcl_cosine", c.objectives.xwcl_cosine},
            {"struca_cross_entropy", c.objectives.struca_cross_entropy}}},
          {"mask",
           {{"rate", c.mask.rate},
            {"mask_token_share", c.mask.mask_token_share},
            {"random_token_share", c.mask.random_token_share},
            {"ensure_one", c.mask.ensure_one}}}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.peak_lr = j.at("peak_lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.warmup_frac = j.at("warmup_frac").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  const auto& o = j.at("objectives");
  c.objectives.tau_xwcl = o.at("tau_xwcl").get<double>();
  c.objectives.tau_struca = o.at("tau_struca").get<double>();
  c.objectives.alpha = o.at("alpha").get<double>();
  c.objectives.enabled = {false, false, false, false};
  for (const auto& name : o.at("enabled")) c.objectives.set_enabled(parse_objective(name.get<std::string>()), true);
  c.objectives.xwcl_sum = o.at("xwcl_sum").get<bool>();
  c.objectives.xwcl_cosine = o.at("xwcl_cosine").get<bool>();
  c.objectives.struca_cross_entropy = o.at("struca_cross_entropy").get<bool>();
  const auto& m = j.at("mask");
  c.mask.rate = m.at("rate").get<double>();
  c.mask.mask_token_share = m.at("mask_token_share").get<double>();
  c.mask.random_token_share = m.at("random_token_share").get<double>();
  c.mask.ensure_one = m.at("ensure_one").get<bool>();
  return c;
}

json state_to_json(const TrainingState& s) {
  json history = json::array();
  for (const auto& r : s.history) {
    history.push_back({r.step, r.loss.tlm, r.loss.xwcl, r.loss.senta, r.loss.struca, r.loss.total, r.lr});
  }
  json best = std::isfinite(s.best_epoch_total) ? json(s.best_epoch_total) : json(nullptr);
  return {{"step", s.step},
          {"total_steps", s.total_steps},
          {"adam_t", s.adam.t},
          {"best_epoch_total", best},
          {"history", history}};
}

TrainingState state_from_json(const json& j) {
  TrainingState s;
  s.step = j.at("step").get<std::size_t>();
  s.total_steps = j.at("total_steps").get<std::size_t>();
  s.adam.t = j.at("adam_t").get<std::size_t>();
  const auto& best = j.at("best_epoch_total");
  s.best_epoch_total = best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
  for (const auto& row : j.at("history")) {
    if (row.size() != 7) throw DataError("checkpoint history row has " + std::to_string(row.size()) + " fields");
    StepRecord r;
    r.step = row[0].get<std::size_t>();
    r.loss = {row[1].get<double>(), row[2].get<double>(), row[3].get<double>(), row[4].get<double>(),
              row[5].get<double>()};
    r.lr = row[6].get<double>();
    s.history.push_back(r);
  }
  if (s.history.size() != s.step) throw DataError("checkpoint history length does not match its step count");
  return s;
}

struct Entry {
  std::string name;
  const ag::Matrix<float>* value;
};

void write_file(const std::filesystem::path& path, json header, const std::vector<Entry>& tensors) {
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    manifest.push_back({{"name", t.name}, {"shape", {t.value->rows(), t.value->cols()}}, {"offset", offset}});
    offset += 4 * static_cast<std::uint64_t>(t.value->size());
  }
  header["format"] = "mmkd-checkpoint";
  header["version"] = kCheckpointVersion;
  header["manifest"] = std::move(manifest);
  header["payload_bytes"] = offset;

  std::string payload;
  payload.reserve(offset);
  for (const auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.value->size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(t.value->data()[i]);
      for (int b = 0; b < 4; ++b) payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << kMagic << '\n' << header.dump() << '\n';
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("failed while writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

struct ParsedFile {
  json header;
  std::string payload;
};

ParsedFile read_file(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic.rfind("MMKD-CHECKPOINT", 0) != 0) throw DataError(path.string() + " is not a checkpoint");
  if (magic != kMagic) throw DataError(path.string() + ": unsupported checkpoint version line '" + magic + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": truncated checkpoint header");
  ParsedFile f;
  try {
    f.header = json::parse(line);
    if (f.header.at("format").get<std::string>() != "mmkd-checkpoint") throw DataError("unknown format");
    const int version = f.header.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError(path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
    }
    const auto found = f.header.at("kind").get<std::string>();
    if (found != kind) throw DataError(path.string() + " holds a " + found + " checkpoint, expected " + kind);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  std::ostringstream rest;
  rest << in.rdbuf();
  f.payload = rest.str();
  const auto expected = f.header.at("payload_bytes").get<std::uint64_t>();
  if (f.payload.size() < expected) {
    throw DataError(path.string() + ": truncated checkpoint (" + std::to_string(f.payload.size()) + " of " +
                    std::to_string(expected) + " payload bytes)");
  }
  if (f.payload.size() > expected) throw DataError(path.string() + ": trailing bytes after checkpoint payload");
  return f;
}

// Fills `targets` from the payload, matching manifest entries by name and
// shape.
void fill_tensors(const ParsedFile& f, const std::vector<std::pair<std::string, ag::Matrix<float>*>>& targets) {
  const auto& manifest = f.header.at("manifest");
  if (manifest.size() != targets.size()) {
    throw ConfigError("checkpoint manifest lists " + std::to_string(manifest.size()) + " tensors, expected " +
                      std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& e = manifest[i];
    const auto& [name, dst] = targets[i];
    if (e.at("name").get<std::string>() != name) {
      throw ConfigError("checkpoint tensor " + std::to_string(i) + " is '" + e.at("name").get<std::string>() +
                        "', expected '" + name + "'");
    }
    const auto rows = e.at("shape").at(0).get<Eigen::Index>();
    const auto cols = e.at("shape").at(1).get<Eigen::Index>();
    if (dst->rows() != rows || dst->cols() != cols) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(dst->rows()) + "x" +
                        std::to_string(dst->cols()));
    }
    const auto offset = e.at("offset").get<std::uint64_t>();
    if (offset + 4 * static_cast<std::uint64_t>(rows * cols) > f.payload.size()) {
      throw DataError("checkpoint tensor '" + name + "' extends past the payload");
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(f.payload.data() + offset);
    for (Eigen::Index k = 0; k < rows * cols; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * k + b]) << (8 * b);
      dst->data()[k] = std::bit_cast<float>(bits);
    }
  }
}

template <typename Fn>
auto guard_json(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
  }
}

}  // namespace

void save_encoder_checkpoint(const std::filesystem::path& path, const Encoder<float>& encoder) {
  json header = {{"kind", "encoder"}, {"config", to_json(encoder.config())}};
  std::vector<Entry> tensors;
  const auto params = encoder.parameters();
  for (const auto& p : params) tensors.push_back({p.name, &p.tensor.value()});
  write_file(path, std::move(header), tensors);
}

Encoder<float> load_encoder_checkpoint(const std::filesystem::path& path, const EncoderConfig* expected) {
  const auto f = read_file(path, "encoder");
  const auto cfg = guard_json(path, [&] { return encoder_from_json(f.header.at("config")); });
  if (expected != nullptr && !(*expected == cfg)) {
    throw ConfigError(path.string() + ": encoder config (vocab_size " + std::to_string(cfg.vocab_size) +
                      ", hidden_dim " + std::to_string(cfg.hidden_dim) + ") does not match the expected one (vocab_size " +
                      std::to_string(expected->vocab_size) + ", hidden_dim " + std::to_string(expected->hidden_dim) +
                      ")");
  }
  Encoder<float> enc(cfg, false);
  std::vector<std::pair<std::string, ag::Matrix<float>*>> targets;
  for (auto p : enc.parameters()) targets.emplace_back(p.name, &p.tensor.mutable_value());
  guard_json(path, [&] {
    fill_tensors(f, targets);
    return 0;
  });
  return enc;
}

void save_bundle_checkpoint(const std::filesystem::path& path, const ModelBundle<float>& bundle,
                            const TrainConfig& train, const TrainingState& state) {
  json header = {{"kind", "bundle"},
                 {"config", to_json(bundle.config)},
                 {"train", to_json(train)},
                 {"state", state_to_json(state)}};
  const auto all = all_parameters(bundle);
  const auto trainable = trainable_parameters(bundle);
  std::vector<Entry> tensors;
  for (const auto& p : all) tensors.push_back({p.name, &p.tensor.value()});
  if (!state.adam.m.empty()) {
    if (state.adam.m.size() != trainable.size()) throw ConfigError("optimizer state does not match the bundle");
    for (std::size_t i = 0; i < trainable.size(); ++i) tensors.push_back({"adam.m." + trainable[i].name, &state.adam.m[i]});
    for (std::size_t i = 0; i < trainable.size(); ++i) tensors.push_back({"adam.v." + trainable[i].name, &state.adam.v[i]});
  }
  write_file(path, std::move(header), tensors);
}

LoadedBundle load_bundle_checkpoint(const std::filesystem::path& path, const BundleConfig* expected) {
  const auto f = read_file(path, "bundle");
  auto [cfg, train, state] = guard_json(path, [&] {
    return std::tuple{bundle_from_json(f.header.at("config")), train_from_json(f.header.at("train")),
                      state_from_json(f.header.at("state"))};
  });
  if (expected != nullptr && !(*expected == cfg)) {
    throw ConfigError(path.string() + ": bundle config does not match the expected one (student vocab_size " +
                      std::to_string(cfg.student.vocab_size) + " vs " + std::to_string(expected->student.vocab_size) +
                      ", teacher vocab_size " + std::to_string(cfg.teacher.vocab_size) + " vs " +
                      std::to_string(expected->teacher.vocab_size) + ")");
  }
  LoadedBundle out{ModelBundle<float>(cfg), std::move(train), std::move(state)};
  const auto all = all_parameters(out.bundle);
  const auto trainable = trainable_parameters(out.bundle);
  std::vector<std::pair<std::string, ag::Matrix<float>*>> targets;
  for (auto p : all) targets.emplace_back(p.name, &p.tensor.mutable_value());
  const bool has_moments = f.header.at("manifest").size() > all.size();
  if (has_moments) {
    out.state.adam.m.clear();
    out.state.adam.v.clear();
    for (const auto& p : trainable) out.state.adam.m.push_back(ag::Matrix<float>::Zero(p.tensor.rows(), p.tensor.cols()));
    for (const auto& p : trainable) out.state.adam.v.push_back(ag::Matrix<float>::Zero(p.tensor.rows(), p.tensor.cols()));
    for (std::size_t i = 0; i < trainable.size(); ++i) targets.emplace_back("adam.m." + trainable[i].name, &out.state.adam.m[i]);
    for (std::size_t i = 0; i < trainable.size(); ++i) targets.emplace_back("adam.v." + trainable[i].name, &out.state.adam.v[i]);
  }
  guard_json(path, [&] {
    fill_tensors(f, targets);
    return 0;
  });
  return out;
}

}  // namespace mmkd
