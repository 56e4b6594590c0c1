#include "mmkd/config.hpp"

#include "mmkd/errors.hpp"
#include "mmkd/random.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace mmkd {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0;
  in >> out;
  if (in.fail() || !in.eof()) {
    // istringstream leaves eof unset when the whole string parsed cleanly
    // but trailing whitespace was absent; check the remainder explicitly.
    std::string rest;
    if (in.fail() || (in.clear(), in >> rest, !rest.empty())) bad_value(key, v, "a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
  if (l == "false" || l == "no" || l == "off" || l == "0") return false;
  bad_value(key, v, "true or false");
}

std::string fmt_real(double x) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17) << x;
  return out.str();
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

// A config key with its parser and printer.
struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;

  std::string name() const { return section + "." + key; }
};

template <typename Member>
Field count_field(std::string section, std::string key, Member member) {
  auto name = section + "." + key;
  return {std::move(section), std::move(key),
          [member, name](RunConfig& c, const std::string& v) { member(c) = parse_count(name, v); },
          [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <typename Member>
Field real_field(std::string section, std::string key, Member member) {
  auto name = section + "." + key;
  return {std::move(section), std::move(key),
          [member, name](RunConfig& c, const std::string& v) { member(c) = parse_real(name, v); },
          [member](const RunConfig& c) { return fmt_real(member(const_cast<RunConfig&>(c))); }};
}

template <typename Member>
Field bool_field(std::string section, std::string key, Member member) {
  auto name = section + "." + key;
  return {std::move(section), std::move(key),
          [member, name](RunConfig& c, const std::string& v) { member(c) = parse_bool(name, v); },
          [member](const RunConfig& c) { return fmt_bool(member(const_cast<RunConfig&>(c))); }};
}

void add_model_fields(std::vector<Field>& f, const std::string& s, ModelSection RunConfig::*m) {
  f.push_back(count_field(s, "layers", [m](RunConfig& c) -> auto& { return (c.*m).encoder.layers; }));
  f.push_back(count_field(s, "hidden_dim", [m](RunConfig& c) -> auto& { return (c.*m).encoder.hidden_dim; }));
  f.push_back(count_field(s, "heads", [m](RunConfig& c) -> auto& { return (c.*m).encoder.heads; }));
  f.push_back(count_field(s, "ffn_dim", [m](RunConfig& c) -> auto& { return (c.*m).encoder.ffn_dim; }));
  f.push_back(count_field(s, "max_len", [m](RunConfig& c) -> auto& { return (c.*m).encoder.max_len; }));
  f.push_back(real_field(s, "dropout", [m](RunConfig& c) -> auto& { return (c.*m).encoder.dropout; }));
  f.push_back(count_field(s, "vocab_max", [m](RunConfig& c) -> auto& { return (c.*m).vocab_max; }));
  f.push_back(count_field(s, "chunk", [m](RunConfig& c) -> auto& { return (c.*m).chunk; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back({"run", "seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64("run.seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    f.push_back({"run", "out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
                 [](const RunConfig& c) { return c.out_dir.string(); }});

    f.push_back({"corpus", "files",
                 [](RunConfig& c, const std::string& v) {
                   c.corpus.files.clear();
                   for (const auto& item : split_list(v)) {
                     const auto eq = item.find('=');
                     if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
                       bad_value("corpus.files", item, "lang=path entries");
                     }
                     c.corpus.files.push_back({LanguageId(trim(item.substr(0, eq))), trim(item.substr(eq + 1))});
                   }
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (const auto& file : c.corpus.files) {
                     if (!out.empty()) out += ", ";
                     out += file.lang.code() + "=" + file.path.string();
                   }
                   return out;
                 }});
    f.push_back({"corpus", "source_lang", [](RunConfig& c, const std::string& v) { c.corpus.source_lang = v; },
                 [](const RunConfig& c) { return c.corpus.source_lang; }});
    f.push_back(count_field("corpus", "min_tokens", [](RunConfig& c) -> auto& { return c.corpus.limits.min_tokens; }));
    f.push_back(count_field("corpus", "max_tokens", [](RunConfig& c) -> auto& { return c.corpus.limits.max_tokens; }));
    f.push_back(count_field("corpus", "prune", [](RunConfig& c) -> auto& { return c.corpus.prune; }));
    f.push_back(count_field("corpus", "heldout", [](RunConfig& c) -> auto& { return c.corpus.heldout; }));
    f.push_back(bool_field("corpus", "source_copy", [](RunConfig& c) -> auto& { return c.corpus.source_copy; }));

    f.push_back(bool_field("synthetic", "enabled", [](RunConfig& c) -> auto& { return c.synthetic.enabled; }));
    f.push_back({"synthetic", "languages",
                 [](RunConfig& c, const std::string& v) { c.synthetic.languages = split_list(v); },
                 [](const RunConfig& c) {
                   std::string out;
                   for (const auto& l : c.synthetic.languages) out += (out.empty() ? "" : ", ") + l;
                   return out;
                 }});
    f.push_back(count_field("synthetic", "vocab_size", [](RunConfig& c) -> auto& { return c.synthetic.vocab_size; }));
    f.push_back(count_field("synthetic", "pair_count", [](RunConfig& c) -> auto& { return c.synthetic.pair_count; }));
    f.push_back(count_field("synthetic", "min_len", [](RunConfig& c) -> auto& { return c.synthetic.min_len; }));
    f.push_back(count_field("synthetic", "max_len", [](RunConfig& c) -> auto& { return c.synthetic.max_len; }));
    f.push_back(count_field("synthetic", "successors", [](RunConfig& c) -> auto& { return c.synthetic.successors; }));
    f.push_back(real_field("synthetic", "coherence", [](RunConfig& c) -> auto& { return c.synthetic.coherence; }));
    f.push_back({"synthetic", "reorder",
                 [](RunConfig& c, const std::string& v) { c.synthetic.reorder = parse_reorder(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.synthetic.reorder)); }});

    add_model_fields(f, "teacher", &RunConfig::teacher);
    add_model_fields(f, "student", &RunConfig::student);

    f.push_back(count_field("pretrain", "steps", [](RunConfig& c) -> auto& { return c.pretrain.steps; }));
    f.push_back(count_field("pretrain", "batch_size", [](RunConfig& c) -> auto& { return c.pretrain.batch_size; }));
    f.push_back(real_field("pretrain", "peak_lr", [](RunConfig& c) -> auto& { return c.pretrain.peak_lr; }));
    f.push_back(real_field("pretrain", "warmup_frac", [](RunConfig& c) -> auto& { return c.pretrain.warmup_frac; }));
    f.push_back(real_field("pretrain", "weight_decay", [](RunConfig& c) -> auto& { return c.pretrain.weight_decay; }));
    f.push_back(real_field("pretrain", "grad_clip", [](RunConfig& c) -> auto& { return c.pretrain.grad_clip; }));

    f.push_back(count_field("heads", "mid_dim", [](RunConfig& c) -> auto& { return c.head.mid_dim; }));
    f.push_back(count_field("heads", "out_dim", [](RunConfig& c) -> auto& { return c.head.out_dim; }));
    f.push_back(bool_field("heads", "teacher_trainable", [](RunConfig& c) -> auto& { return c.teacher_heads_trainable; }));

    f.push_back(real_field("train", "peak_lr", [](RunConfig& c) -> auto& { return c.train.peak_lr; }));
    f.push_back(real_field("train", "weight_decay", [](RunConfig& c) -> auto& { return c.train.weight_decay; }));
    f.push_back(real_field("train", "warmup_frac", [](RunConfig& c) -> auto& { return c.train.warmup_frac; }));
    f.push_back(count_field("train", "batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    f.push_back(count_field("train", "epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
    f.push_back(count_field("train", "max_seq_len", [](RunConfig& c) -> auto& { return c.train.max_seq_len; }));
    f.push_back(real_field("train", "beta1", [](RunConfig& c) -> auto& { return c.train.beta1; }));
    f.push_back(real_field("train", "beta2", [](RunConfig& c) -> auto& { return c.train.beta2; }));
    f.push_back(real_field("train", "adam_eps", [](RunConfig& c) -> auto& { return c.train.adam_eps; }));
    f.push_back(real_field("train", "grad_clip", [](RunConfig& c) -> auto& { return c.train.grad_clip; }));
    f.push_back(real_field("train", "mask_rate", [](RunConfig& c) -> auto& { return c.train.mask.rate; }));
    f.push_back(real_field("train", "mask_token_share", [](RunConfig& c) -> auto& { return c.train.mask.mask_token_share; }));
    f.push_back(real_field("train", "random_token_share", [](RunConfig& c) -> auto& { return c.train.mask.random_token_share; }));

    f.push_back({"objectives", "enabled",
                 [](RunConfig& c, const std::string& v) {
                   c.train.objectives.enabled = {false, false, false, false};
                   for (const auto& name : split_list(v)) c.train.objectives.set_enabled(parse_objective(name), true);
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (auto o : kAllObjectives) {
                     if (c.train.objectives.is_enabled(o)) out += (out.empty() ? "" : ", ") + std::string(to_string(o));
                   }
                   return out;
                 }});
    f.push_back(real_field("objectives", "tau_xwcl", [](RunConfig& c) -> auto& { return c.train.objectives.tau_xwcl; }));
    f.push_back(real_field("objectives", "tau_struca", [](RunConfig& c) -> auto& { return c.train.objectives.tau_struca; }));
    f.push_back(real_field("objectives", "alpha", [](RunConfig& c) -> auto& { return c.train.objectives.alpha; }));
    f.push_back(bool_field("objectives", "xwcl_sum", [](RunConfig& c) -> auto& { return c.train.objectives.xwcl_sum; }));
    f.push_back(bool_field("objectives", "xwcl_cosine", [](RunConfig& c) -> auto& { return c.train.objectives.xwcl_cosine; }));
    f.push_back(bool_field("objectives", "struca_cross_entropy",
                           [](RunConfig& c) -> auto& { return c.train.objectives.struca_cross_entropy; }));

    f.push_back(count_field("eval", "viz_sentences", [](RunConfig& c) -> auto& { return c.eval.viz_sentences; }));
    return f;
  }();
  return all;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

void apply(RunConfig& cfg, const std::string& dotted, const std::string& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) throw ConfigError("config key '" + dotted + "' must look like section.key");
  const auto* f = find_field(dotted.substr(0, dot), dotted.substr(dot + 1));
  if (f == nullptr) throw ConfigError("unknown config key '" + dotted + "'");
  f->set(cfg, trim(value));
}

RunConfig finish(RunConfig cfg, const ConfigOverrides& overrides) {
  for (const auto& [k, v] : overrides) apply(cfg, k, v);
  derive_component_seeds(cfg);
  cfg.validate();
  return cfg;
}

}  // namespace

void derive_component_seeds(RunConfig& cfg) {
  cfg.teacher.encoder.seed = derive_seed(cfg.seed, {kTagInit, 1});
  cfg.student.encoder.seed = derive_seed(cfg.seed, {kTagInit, 2});
  cfg.head_seed = derive_seed(cfg.seed, {kTagInit, 3});
  cfg.pretrain.seed = derive_seed(cfg.seed, {kTagMlm});
  cfg.train.seed = cfg.seed;
}

std::uint64_t synthetic_source_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, {kTagSelect, 0}); }

std::uint64_t synthetic_bijection_seed(const RunConfig& cfg, std::size_t index) {
  return derive_seed(cfg.seed, {kTagSelect, index + 1});
}

void RunConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("run.out_dir must not be empty");
  if (synthetic.enabled == !corpus.files.empty()) {
    throw ConfigError("set exactly one data source: corpus.files or synthetic.enabled = true");
  }
  if (synthetic.enabled) {
    if (synthetic.languages.empty()) throw ConfigError("synthetic.languages is empty");
    std::set<std::string> seen;
    for (const auto& l : synthetic.languages) {
      LanguageId check(l);
      if (!seen.insert(l).second) throw ConfigError("synthetic language '" + l + "' listed twice");
      if (l == corpus.source_lang) throw ConfigError("synthetic language '" + l + "' clashes with corpus.source_lang");
    }
    if (synthetic.vocab_size < 2) throw ConfigError("synthetic.vocab_size must be at least 2");
    if (synthetic.min_len == 0 || synthetic.min_len > synthetic.max_len) {
      throw ConfigError("synthetic lengths need 0 < min_len <= max_len");
    }
    if (synthetic.successors == 0) throw ConfigError("synthetic.successors must be positive");
    if (synthetic.coherence < 0 || synthetic.coherence > 1) throw ConfigError("synthetic.coherence must be in [0, 1]");
  } else {
    std::set<std::string> seen;
    for (const auto& f : corpus.files) {
      if (!seen.insert(f.lang.code()).second) throw ConfigError("corpus language '" + f.lang.code() + "' listed twice");
      if (f.lang.code() == corpus.source_lang) {
        throw ConfigError("corpus language '" + f.lang.code() + "' clashes with corpus.source_lang");
      }
    }
  }
  LanguageId source(corpus.source_lang);
  if (corpus.limits.min_tokens > corpus.limits.max_tokens) throw ConfigError("corpus.min_tokens exceeds max_tokens");

  for (const auto* m : {&teacher, &student}) {
    auto probe = m->encoder;
    probe.vocab_size = std::max<std::size_t>(probe.vocab_size, Specials::count + 1);
    probe.validate();
    if (m->vocab_max <= static_cast<std::size_t>(Specials::count)) {
      throw ConfigError("vocab_max must exceed the special tokens");
    }
  }
  pretrain.validate();
  HeadConfig h = head;
  h.in_dim = teacher.encoder.hidden_dim;
  h.validate();
  if (teacher.encoder.hidden_dim != student.encoder.hidden_dim) {
    throw ConfigError("teacher and student hidden_dim must match so the heads are shared in shape");
  }
  const std::size_t languages =
      (synthetic.enabled ? synthetic.languages.size() : corpus.files.size()) + (corpus.source_copy ? 1 : 0);
  train.validate(languages);
  if (!train.objectives.any_enabled()) throw ConfigError("objectives.enabled lists no objective");
  if (eval.viz_sentences == 0) throw ConfigError("eval.viz_sentences must be positive");
}

RunConfig parse_run_config(const std::string& ini_text, const ConfigOverrides& overrides) {
  // The INI reader only knows ';' comments.
  std::string cleaned;
  std::istringstream lines(ini_text);
  for (std::string line; std::getline(lines, line);) {
    const auto t = trim(line);
    if (!t.empty() && t[0] == '#') continue;
    cleaned += line + "\n";
  }
  pt::ptree tree;
  try {
    std::istringstream in(cleaned);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("malformed config: " + std::string(e.what()));
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' must sit inside a [section]");
    }
    for (const auto& [key, value] : body) apply(cfg, section + "." + key, value.data());
  }
  return finish(std::move(cfg), overrides);
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const ConfigOverrides& overrides) {
  if (!path) return finish(RunConfig{}, overrides);
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path->string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), overrides);
}

std::string to_ini(const RunConfig& cfg) {
  std::ostringstream out;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out << "\n";
      out << "[" << f.section << "]\n";
      current = f.section;
    }
    out << f.key << " = " << f.get(cfg) << "\n";
  }
  return out.str();
}

}  // namespace mmkd
