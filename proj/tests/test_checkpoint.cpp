#include "doctest.h"

#include "fixtures.hpp"
#include "mmkd/checkpoint.hpp"
#include "mmkd/errors.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace mmkd;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mmkd_test_checkpoint";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30}); }

}  // namespace

TEST_CASE("encoder checkpoint round-trips bit-exactly") {
  const auto path = temp_path("encoder.ckpt");
  const Encoder<float> enc(fixture::encoder(40, 3));
  save_encoder_checkpoint(path, enc);
  CHECK(slurp(path).rfind("MMKD-CHECKPOINT v1\n", 0) == 0);
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
  const auto back = load_encoder_checkpoint(path);
  CHECK(back.config() == enc.config());
  CHECK_FALSE(back.trainable());
  CHECK(parameter_hash(back.parameters()) == parameter_hash(enc.parameters()));

  const auto expected = enc.config();
  CHECK_NOTHROW(load_encoder_checkpoint(path, &expected));
  auto wrong = expected;
  wrong.vocab_size = 41;
  CHECK_THROWS_AS(load_encoder_checkpoint(path, &wrong), ConfigError);
}

TEST_CASE("malformed checkpoints raise DataError") {
  const auto path = temp_path("encoder2.ckpt");
  save_encoder_checkpoint(path, Encoder<float>(fixture::encoder(40, 3)));
  const auto good = slurp(path);
  const auto bad = temp_path("bad.ckpt");

  spit(bad, good.substr(0, good.size() - 10));
  CHECK_THROWS_AS(load_encoder_checkpoint(bad), DataError);
  spit(bad, good + "x");
  CHECK_THROWS_AS(load_encoder_checkpoint(bad), DataError);
  spit(bad, "NOT-A-CHECKPOINT v1\n{}\n");
  CHECK_THROWS_AS(load_encoder_checkpoint(bad), DataError);
  spit(bad, "MMKD-CHECKPOINT v1\n{not json\n");
  CHECK_THROWS_AS(load_encoder_checkpoint(bad), DataError);
  auto future = good;
  future.replace(future.find("\"version\":1"), 11, "\"version\":9");
  spit(bad, future);
  CHECK_THROWS_AS(load_encoder_checkpoint(bad), DataError);
  CHECK_THROWS_AS(load_encoder_checkpoint(temp_path("missing.ckpt")), DataError);
}

TEST_CASE("bundle checkpoint restores parameters, moments and state") {
  const auto t = fixture::tiny();
  ModelBundle<float> bundle(t.bundle);
  auto cfg = t.train;
  cfg.epochs = 2;
  Trainer trainer(bundle, t.student_vocab, t.teacher_vocab, t.corpus, cfg);
  for (int i = 0; i < 5; ++i) trainer.step();
  const auto path = temp_path("bundle.ckpt");
  save_bundle_checkpoint(path, bundle, trainer.config(), trainer.state());

  const auto loaded = load_bundle_checkpoint(path);
  CHECK(loaded.bundle.config == bundle.config);
  CHECK(loaded.train == trainer.config());
  CHECK(loaded.state.step == 5);
  CHECK(loaded.state.total_steps == trainer.state().total_steps);
  CHECK(loaded.state.adam.t == trainer.state().adam.t);
  REQUIRE(loaded.state.history.size() == 5);
  CHECK(loaded.state.history[4].loss.total == doctest::Approx(trainer.state().history[4].loss.total).epsilon(1e-7));
  CHECK(parameter_hash(all_parameters(loaded.bundle)) == parameter_hash(all_parameters(bundle)));
  REQUIRE(loaded.state.adam.m.size() == trainer.state().adam.m.size());
  for (std::size_t i = 0; i < loaded.state.adam.m.size(); ++i) {
    CHECK(loaded.state.adam.m[i] == trainer.state().adam.m[i]);
    CHECK(loaded.state.adam.v[i] == trainer.state().adam.v[i]);
  }
  CHECK_FALSE(loaded.bundle.teacher_encoder.trainable());

  auto other = t.bundle;
  other.student.vocab_size += 1;
  CHECK_THROWS_AS(load_bundle_checkpoint(path, &other), ConfigError);
}

TEST_CASE("resuming from a checkpoint matches uninterrupted training") {
  const auto t = fixture::tiny();
  auto cfg = t.train;
  cfg.epochs = 2;

  ModelBundle<float> straight(t.bundle);
  Trainer full(straight, t.student_vocab, t.teacher_vocab, t.corpus, cfg);
  full.run();

  ModelBundle<float> first(t.bundle);
  Trainer part(first, t.student_vocab, t.teacher_vocab, t.corpus, cfg);
  for (int i = 0; i < 7; ++i) part.step();
  const auto path = temp_path("resume.ckpt");
  save_bundle_checkpoint(path, first, part.config(), part.state());

  auto loaded = load_bundle_checkpoint(path);
  Trainer resumed(loaded.bundle, t.student_vocab, t.teacher_vocab, t.corpus, loaded.train, loaded.state);
  resumed.run();
  const auto& a = full.state().history;
  const auto& b = resumed.state().history;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 7; i < a.size(); ++i) CHECK(rel(a[i].loss.total, b[i].loss.total) < 1e-6);
  CHECK(parameter_hash(trainable_parameters(straight)) == parameter_hash(trainable_parameters(loaded.bundle)));
}
