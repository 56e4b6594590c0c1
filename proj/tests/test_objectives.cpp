#include "doctest.h"
#include "oracles.hpp"

#include "mmkd/errors.hpp"
#include "mmkd/objectives.hpp"

#include <cmath>
#include <random>

using namespace mmkd;
using Mat = ag::Matrix<double>;
using T = ag::Tensor<double>;

namespace {

Mat from_rows(const oracle::Mat& rows) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

oracle::Mat random_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  oracle::Mat m(n, oracle::Vec(d));
  for (auto& r : m) {
    for (auto& x : r) x = g(rng);
  }
  return m;
}

// Teacher rows 1..n are the words; student rows at the same positions.
WordAlignment simple_alignment(std::size_t words) {
  WordAlignment a;
  for (std::size_t w = 0; w < words; ++w) a.pairs.push_back({static_cast<std::int32_t>(w), w + 1, w + 1});
  return a;
}

MaskPlan heads_plan(std::initializer_list<std::size_t> heads) {
  MaskPlan p;
  for (auto h : heads) {
    p.positions.push_back(h);
    p.kinds.push_back(MaskKind::mask_token);
    p.original_ids.push_back(Specials::count);
    p.word_heads.push_back(h);
  }
  return p;
}

}  // namespace

TEST_CASE("l2_normalize") {
  const double v[] = {3, 4};
  const auto u = l2_normalize(v);
  CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-12));
  const double unit[] = {0, 1, 0};
  const auto same = l2_normalize(unit);
  CHECK(same == std::vector<double>{0, 1, 0});
  const double zero[] = {0, 0};
  CHECK_THROWS_AS(l2_normalize(zero), NumericError);
}

TEST_CASE("tlm loss examples") {
  MaskPlan plan;
  plan.positions = {1, 2};
  plan.kinds = {MaskKind::mask_token, MaskKind::mask_token};
  plan.original_ids = {2, 3};
  SUBCASE("uniform logits give ln 4") {
    auto logits = T::constant(Mat::Zero(2, 4));
    CHECK(tlm_loss(logits, plan).value.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("+20 margin on the correct id") {
    Mat m = Mat::Zero(2, 4);
    m(0, 2) = 20;
    m(1, 3) = 20;
    // The exact value is log(1 + 3e-20), far below 1e-8.
    CHECK(tlm_loss(T::constant(m), plan).value.item() < 1e-8);
  }
  SUBCASE("mean of ln 4 and ~0") {
    Mat m = Mat::Zero(2, 4);
    m(1, 3) = 1000;
    CHECK(tlm_loss(T::constant(m), plan).value.item() == doctest::Approx(std::log(4.0) / 2).epsilon(1e-12));
  }
  SUBCASE("empty plan") {
    auto r = tlm_loss(T::constant(Mat::Zero(0, 4)), MaskPlan{});
    CHECK(r.empty);
    CHECK(r.value.item() == 0.0);
  }
}

TEST_CASE("xwcl two-word oracle") {
  Mat teacher(3, 2);
  teacher << 9, 9, 1, 0, 0, 1;
  Mat student(3, 2);
  student << 5, 5, 1, 0, 7, 7;
  const double expected = oracle::info_nce({{1, 0}}, {0}, {{1, 0}, {0, 1}}, 1.0);
  CHECK(expected == doctest::Approx(0.31326168751822286).epsilon(1e-12));
  const auto got = xwcl_loss(T::constant(student), T::constant(teacher), simple_alignment(2), heads_plan({1}),
                             XwclOptions{1.0, false, false});
  CHECK(std::abs(got.value.item() - 0.3133) <= 1e-4);
  CHECK(got.value.item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("xwcl single candidate is zero and tau limit is ln n") {
  Mat teacher(2, 3);
  teacher << 0, 0, 0, 0.3, -2, 5;
  Mat student(2, 3);
  student << 0, 0, 0, 4, 1, -1;
  CHECK(xwcl_loss(T::constant(student), T::constant(teacher), simple_alignment(1), heads_plan({1}), {0.1, false, false})
            .value.item() == doctest::Approx(0.0).epsilon(1e-15));

  std::mt19937_64 rng(3);
  auto t = random_rows(rng, 5, 4);
  auto s = random_rows(rng, 5, 4);
  const auto loss = xwcl_loss(T::constant(from_rows(s)), T::constant(from_rows(t)), simple_alignment(4),
                              heads_plan({1, 3}), {1e6, false, false});
  CHECK(loss.value.item() == doctest::Approx(std::log(4.0)).epsilon(1e-5));
}

TEST_CASE("xwcl matches the oracle on random instances, sum and cosine variants") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_rows(rng, 6, 5);
    auto s = random_rows(rng, 6, 5);
    oracle::Mat cands(t.begin() + 1, t.end());
    const oracle::Mat queries = {s[2], s[4]};
    const double mean = oracle::info_nce(queries, {1, 3}, cands, 0.5);
    const auto opts = XwclOptions{0.5, false, false};
    const auto got = xwcl_loss(T::constant(from_rows(s)), T::constant(from_rows(t)), simple_alignment(5),
                               heads_plan({2, 4}), opts);
    CHECK(got.value.item() == doctest::Approx(mean).epsilon(1e-10));
    const auto summed = xwcl_loss(T::constant(from_rows(s)), T::constant(from_rows(t)), simple_alignment(5),
                                  heads_plan({2, 4}), XwclOptions{0.5, true, false});
    CHECK(summed.value.item() == doctest::Approx(2 * mean).epsilon(1e-10));

    oracle::Mat ncands, nqueries;
    for (auto& c : cands) ncands.push_back(oracle::normalized(c));
    for (auto& q : queries) nqueries.push_back(oracle::normalized(q));
    const auto cosine = xwcl_loss(T::constant(from_rows(s)), T::constant(from_rows(t)), simple_alignment(5),
                                  heads_plan({2, 4}), XwclOptions{0.5, false, true});
    CHECK(cosine.value.item() == doctest::Approx(oracle::info_nce(nqueries, {1, 3}, ncands, 0.5)).epsilon(1e-10));
  }
}

TEST_CASE("xwcl is invariant to the order of non-masked candidates") {
  std::mt19937_64 rng(5);
  auto t = random_rows(rng, 5, 3);
  auto s = random_rows(rng, 5, 3);
  const auto base = xwcl_loss(T::constant(from_rows(s)), T::constant(from_rows(t)), simple_alignment(4),
                              heads_plan({2}), {0.3, false, false});
  // Swap teacher words 3 and 4 (both unmasked) together with their alignment.
  std::swap(t[3], t[4]);
  auto align = simple_alignment(4);
  std::swap(align.pairs[2].teacher_position, align.pairs[3].teacher_position);
  const auto permuted = xwcl_loss(T::constant(from_rows(s)), T::constant(from_rows(t)), align, heads_plan({2}),
                                  {0.3, false, false});
  CHECK(permuted.value.item() == doctest::Approx(base.value.item()).epsilon(1e-12));
}

TEST_CASE("xwcl errors") {
  Mat m = Mat::Ones(3, 2);
  CHECK_THROWS_AS(xwcl_loss(T::constant(m), T::constant(m), simple_alignment(2), MaskPlan{}, {}), DataError);
  CHECK_THROWS_AS(xwcl_loss(T::constant(m), T::constant(m), simple_alignment(1), heads_plan({2}), {}), DataError);
}

TEST_CASE("senta examples and identity") {
  CHECK(senta_loss(T::constant(from_rows({{1, 0}})), T::constant(from_rows({{0, 1}}))).item() ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(senta_loss(T::constant(from_rows({{1, 0}})), T::constant(from_rows({{0, 1}}))).item() - 2.0) <= 1e-9);
  CHECK(senta_loss(T::constant(from_rows({{2, 1}})), T::constant(from_rows({{-4, -2}}))).item() ==
        doctest::Approx(4.0).epsilon(1e-12));
  std::mt19937_64 rng(2);
  auto a = random_rows(rng, 4, 6);
  CHECK(senta_loss(T::constant(from_rows(a)), T::constant(from_rows(a))).item() == 0.0);
  auto b = random_rows(rng, 4, 6);
  const double got = senta_loss(T::constant(from_rows(a)), T::constant(from_rows(b))).item();
  CHECK(got == doctest::Approx(oracle::senta(a, b)).epsilon(1e-12));
  double via_dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) via_dot += 2 - 2 * oracle::dot(oracle::normalized(a[i]), oracle::normalized(b[i]));
  CHECK(got == doctest::Approx(via_dot / 4).epsilon(1e-12));
  CHECK_THROWS_AS(senta_loss(T::constant(from_rows(a)), T::constant(from_rows({{1, 2, 3, 4, 5, 6}}))), ConfigError);
}

TEST_CASE("struca 2x2 oracle and identities") {
  const oracle::Mat teacher = {{1, 0}, {0, 1}};
  const oracle::Mat student = {{1, 0}, {1, 0}};
  const double expected = oracle::struca(student, teacher, 1.0);
  const double got = struca_loss(T::constant(from_rows(student)), T::constant(from_rows(teacher)), 1.0, false).item();
  CHECK(std::abs(got - 0.2219) <= 1e-4);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));

  std::mt19937_64 rng(8);
  auto z = random_rows(rng, 4, 3);
  CHECK(struca_loss(T::constant(from_rows(z)), T::constant(from_rows(z)), 0.1, false).item() == 0.0);
  CHECK(struca_loss(T::constant(from_rows({{1, 2}})), T::constant(from_rows({{-3, 1}})), 0.1, false).item() == 0.0);

  auto zs = random_rows(rng, 4, 3);
  const double base = struca_loss(T::constant(from_rows(zs)), T::constant(from_rows(z)), 0.2, false).item();
  CHECK(base == doctest::Approx(oracle::struca(zs, z, 0.2)).epsilon(1e-10));
  CHECK(base >= 0.0);
  // Simultaneous permutation of both batches.
  std::swap(zs[0], zs[3]);
  std::swap(z[0], z[3]);
  CHECK(struca_loss(T::constant(from_rows(zs)), T::constant(from_rows(z)), 0.2, false).item() ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("struca cross-entropy mode differs by the teacher entropy") {
  std::mt19937_64 rng(9);
  auto zt = random_rows(rng, 3, 4);
  auto zs = random_rows(rng, 3, 4);
  const double kl = struca_loss(T::constant(from_rows(zs)), T::constant(from_rows(zt)), 0.5, false).item();
  const double ce = struca_loss(T::constant(from_rows(zs)), T::constant(from_rows(zt)), 0.5, true).item();
  double entropy = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    oracle::Vec row;
    for (std::size_t j = 0; j < 3; ++j) {
      row.push_back(oracle::dot(oracle::normalized(zt[i]), oracle::normalized(zt[j])) / 0.5);
    }
    for (double p : oracle::softmax(row)) entropy -= p * std::log(p);
  }
  CHECK(ce == doctest::Approx(kl + entropy).epsilon(1e-10));
}

TEST_CASE("total loss and combination") {
  ObjectiveConfig cfg;
  cfg.alpha = 0.5;
  LossParts parts{1, 1, 1, 1};
  CHECK(total_loss(parts, cfg).total == doctest::Approx(3.5));
  cfg.alpha = 0;
  parts.struca = 123;
  CHECK(total_loss(parts, cfg).total == doctest::Approx(3.0));
  cfg.enabled = {false, false, false, false};
  const auto none = total_loss(parts, cfg);
  CHECK(none.total == 0.0);
  CHECK(none.tlm == 0.0);
  CHECK(none.struca == 0.0);
  CHECK_FALSE(cfg.any_enabled());

  ObjectiveConfig on;
  on.alpha = 2.0;
  on.set_enabled(Objective::xwcl, false);
  std::array<T, 4> terms;
  for (std::size_t i = 0; i < 4; ++i) {
    Mat v(1, 1);
    v(0, 0) = static_cast<double>(i + 1);
    terms[i] = T::constant(v);
  }
  CHECK(combine_losses(terms, on).item() == doctest::Approx(1 + 3 + 2 * 4));
}

TEST_CASE("objective names") {
  CHECK(parse_objective("senta") == Objective::senta);
  CHECK(parse_objective("StrucA") == Objective::struca);
  CHECK(parse_objective("TLM") == Objective::tlm);
  CHECK(to_string(Objective::xwcl) == "XWCL");
  CHECK_THROWS_AS(parse_objective("MLM"), ConfigError);
  ObjectiveConfig bad;
  bad.tau_struca = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
