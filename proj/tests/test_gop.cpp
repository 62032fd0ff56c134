#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "testutil.hpp"
#include "unlearnq/gop.hpp"

using namespace unlearnq;
using testutil::vec_grads;

namespace {

// Independent per-unit projection oracle: direct Gram-Schmidt on the raw
// vectors, normalization and rescale done longhand.
std::vector<double> layerwise_oracle(const std::vector<double>& f, const std::vector<double>& r,
                                     double alpha, double eps) {
  double nf = 0.0, nr = 0.0;
  for (double v : f) nf += v * v;
  for (double v : r) nr += v * v;
  nf = std::sqrt(nf);
  nr = std::sqrt(nr);
  if (nr <= eps) return f;
  std::vector<double> ft(f.size()), rt(r.size());
  for (std::size_t i = 0; i < f.size(); ++i) ft[i] = f[i] / (nf + eps);
  for (std::size_t i = 0; i < r.size(); ++i) rt[i] = r[i] / (nr + eps);
  double c = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) c += ft[i] * rt[i];
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = (ft[i] - alpha * c * rt[i]) * nf;
  return out;
}

}  // namespace

TEST_CASE("global projection textbook cases") {
  auto gf = vec_grads({1.0, 1.0});
  auto gr = vec_grads({1.0, 0.0});

  SUBCASE("alpha = 1 removes the shared component") {
    auto res = gop::project_global(gf, gr, 1.0);
    CHECK(res.grads.layers[0].weights(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(res.grads.layers[0].weights(0, 1) == doctest::Approx(1.0));
    CHECK_FALSE(res.degenerate());
  }
  SUBCASE("alpha = 0 returns g_f unchanged, exactly") {
    auto res = gop::project_global(gf, gr, 0.0);
    CHECK(res.grads.layers[0].weights(0, 0) == 1.0);
    CHECK(res.grads.layers[0].weights(0, 1) == 1.0);
  }
  SUBCASE("alpha = 0.5 lands halfway") {
    auto res = gop::project_global(gf, gr, 0.5);
    CHECK(res.grads.layers[0].weights(0, 0) == doctest::Approx(0.5));
    CHECK(res.grads.layers[0].weights(0, 1) == doctest::Approx(1.0));
  }
  SUBCASE("vanishing g_r passes through with a flag") {
    auto res = gop::project_global(gf, vec_grads({0.0, 0.0}), 1.0);
    CHECK(res.degenerate());
    CHECK(res.grads.layers[0].weights(0, 0) == 1.0);
    CHECK(res.grads.layers[0].weights(0, 1) == 1.0);
  }
}

TEST_CASE("layer-wise projection hand case (single unit)") {
  // g_f = (2,2), g_r = (3,0), alpha = 1: normalized projection leaves
  // direction (0,1) with norm sin(45deg) = 1/sqrt(2); rescaling by
  // ||g_f|| = 2*sqrt(2) gives (0, 2).
  gop::ProjectionConfig cfg;
  cfg.alpha = 1.0;
  auto res = gop::project_layerwise(vec_grads({2.0, 2.0}), vec_grads({3.0, 0.0}), cfg);
  CHECK(std::abs(res.grads.layers[0].weights(0, 0)) <= 1e-11);  // epsilon-normalization residue
  CHECK(res.grads.layers[0].weights(0, 1) == doctest::Approx(2.0).epsilon(1e-9));
  // output norm never exceeds the input norm
  CHECK(l2_norm(res.grads.layers[0].weights.values()) <=
        l2_norm(std::vector<double>{2.0, 2.0}) * (1.0 + 1e-9));
}

TEST_CASE("already-orthogonal g_f survives layer-wise projection up to epsilon") {
  gop::ProjectionConfig cfg;
  auto res = gop::project_layerwise(vec_grads({0.0, 0.7}), vec_grads({1.3, 0.0}), cfg);
  CHECK(std::abs(res.grads.layers[0].weights(0, 0)) <= 1e-11);
  CHECK(std::abs(res.grads.layers[0].weights(0, 1) - 0.7) / 0.7 <= 1e-9);
}

TEST_CASE("two conflicted units project independently (oracle check)") {
  net::GradientSet gf, gr;
  gf.layers.push_back({"layer0", Matrix(1, 2, {1.0, 2.0}), {3.0, -1.0}});
  gf.layers.push_back({"layer1", Matrix(1, 3, {0.5, -0.5, 2.0}), {}});
  gr.layers.push_back({"layer0", Matrix(1, 2, {-1.0, 1.0}), {2.0, 2.0}});
  gr.layers.push_back({"layer1", Matrix(1, 3, {1.0, 1.0, -1.0}), {}});

  gop::ProjectionConfig cfg;
  cfg.alpha = 1.0;
  auto res = gop::project_layerwise(gf, gr, cfg);

  auto fu = gop::units(gf);
  auto ru = gop::units(gr);
  auto ou = gop::units(res.grads);
  for (std::size_t u = 0; u < fu.size(); ++u) {
    if (fu[u].v.empty()) continue;
    std::vector<double> f(fu[u].v.begin(), fu[u].v.end());
    std::vector<double> r(ru[u].v.begin(), ru[u].v.end());
    auto expect = layerwise_oracle(f, r, cfg.alpha, cfg.epsilon);
    REQUIRE(expect.size() == ou[u].v.size());
    for (std::size_t i = 0; i < expect.size(); ++i)
      CHECK(ou[u].v[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    // per-unit orthogonality after full projection
    const double inner = dot(ou[u].v, ru[u].v);
    CHECK(std::abs(inner) <= 1e-10 * l2_norm(fu[u].v) * l2_norm(ru[u].v) + 1e-15);
  }
}

TEST_CASE("per-unit degenerate g_r passes that unit through, flagged") {
  net::GradientSet gf, gr;
  gf.layers.push_back({"layer0", Matrix(1, 2, {1.0, 1.0}), {2.0}});
  gr.layers.push_back({"layer0", Matrix(1, 2, {1.0, 0.0}), {0.0}});
  gop::ProjectionConfig cfg;
  auto res = gop::project_layerwise(gf, gr, cfg);
  CHECK(res.degenerate());
  REQUIRE(res.passed_through.size() == 1);
  CHECK(res.passed_through[0] == "layer0.bias");
  CHECK(res.grads.layers[0].bias[0] == 2.0);
  // the healthy unit still projected
  CHECK(std::abs(res.grads.layers[0].weights(0, 0)) <= 1e-11);
}

TEST_CASE("Lemma-1 orthogonality over random pairs") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 300; ++t) {
    auto pair = testutil::random_grad_pair(rng);
    const double nr = l2_norm(net::flatten(pair.r));
    if (nr <= 1e-11) continue;
    auto res = gop::project_global(pair.f, pair.r, 1.0);
    const double inner = dot(net::flatten(res.grads), net::flatten(pair.r));
    CHECK(std::abs(inner) <= 1e-10 * l2_norm(net::flatten(pair.f)) * nr + 1e-18);
  }
}

TEST_CASE("projection idempotence at alpha = 1") {
  std::mt19937_64 rng(31337);
  for (int t = 0; t < 100; ++t) {
    auto pair = testutil::random_grad_pair(rng);
    auto once = gop::project_global(pair.f, pair.r, 1.0);
    auto twice = gop::project_global(once.grads, pair.r, 1.0);
    auto a = net::flatten(once.grads);
    auto b = net::flatten(twice.grads);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(std::abs(a[i] - b[i]) <= 1e-10 * std::max(1.0, std::abs(a[i])));
  }
}

TEST_CASE("alpha interpolates linearly between no projection and full projection") {
  std::mt19937_64 rng(8);
  for (gop::Mode mode : {gop::Mode::global, gop::Mode::layerwise}) {
    for (int t = 0; t < 50; ++t) {
      auto pair = testutil::random_grad_pair(rng);
      gop::ProjectionConfig cfg;
      cfg.mode = mode;
      std::uniform_real_distribution<double> a_dist(0.0, 1.0);
      const double alpha = a_dist(rng);
      cfg.alpha = alpha;
      auto at_alpha = net::flatten(gop::project(pair.f, pair.r, cfg).grads);
      cfg.alpha = 0.0;
      auto at_zero = net::flatten(gop::project(pair.f, pair.r, cfg).grads);
      cfg.alpha = 1.0;
      auto at_one = net::flatten(gop::project(pair.f, pair.r, cfg).grads);
      double err = 0.0;
      for (std::size_t i = 0; i < at_alpha.size(); ++i) {
        const double blend = (1.0 - alpha) * at_zero[i] + alpha * at_one[i];
        err += (at_alpha[i] - blend) * (at_alpha[i] - blend);
      }
      CHECK(std::sqrt(err) <= 1e-12);
    }
  }
}

TEST_CASE("layer-wise and global projections genuinely differ") {
  net::GradientSet gf, gr;
  gf.layers.push_back({"layer0", Matrix(1, 2, {1.0, 0.0}), {}});
  gf.layers.push_back({"layer1", Matrix(1, 2, {0.0, 2.0}), {}});
  gr.layers.push_back({"layer0", Matrix(1, 2, {1.0, 1.0}), {}});
  gr.layers.push_back({"layer1", Matrix(1, 2, {-1.0, 1.0}), {}});

  gop::ProjectionConfig cfg;
  cfg.alpha = 1.0;
  cfg.mode = gop::Mode::layerwise;
  auto lw = net::flatten(gop::project(gf, gr, cfg).grads);
  auto gl = net::flatten(gop::project_global(gf, gr, 1.0).grads);
  double diff = 0.0;
  for (std::size_t i = 0; i < lw.size(); ++i) diff += (lw[i] - gl[i]) * (lw[i] - gl[i]);
  CHECK(std::sqrt(diff) > 1e-3);
}

TEST_CASE("diagnostics geometry") {
  SUBCASE("orthogonal pair") {
    auto d = gop::diagnostics(vec_grads({1.0, 0.0}), vec_grads({0.0, 1.0}));
    CHECK(d.cosine == doctest::Approx(0.0));
    CHECK(d.angle == doctest::Approx(std::numbers::pi / 2));
    CHECK(d.forget_alignment == doctest::Approx(1.0));
    CHECK(d.sin2_identity == doctest::Approx(1.0));
    CHECK_FALSE(d.degenerate);
  }
  SUBCASE("45-degree pair satisfies the Theorem-4 identity") {
    auto d = gop::diagnostics(vec_grads({1.0, 1.0}), vec_grads({1.0, 0.0}));
    CHECK(d.cosine == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(d.sin2_identity == doctest::Approx(1.0));       // ||g_f||^2 sin^2 = 2 * 1/2
    CHECK(d.forget_alignment == doctest::Approx(1.0));    // <(1,1),(0,1)> = 1
    CHECK(std::abs(d.forget_alignment - d.sin2_identity) <= 1e-12);
  }
  SUBCASE("collinear pair has zero residual") {
    auto d = gop::diagnostics(vec_grads({2.0, 4.0}), vec_grads({1.0, 2.0}));
    CHECK(d.cosine == doctest::Approx(1.0));
    CHECK(std::abs(d.sin2_identity) <= 1e-12);
    CHECK(std::abs(d.forget_alignment) <= 1e-12);
    auto res = gop::project_global(vec_grads({2.0, 4.0}), vec_grads({1.0, 2.0}), 1.0);
    for (double v : net::flatten(res.grads)) CHECK(std::abs(v) <= 1e-12);
  }
  SUBCASE("zero vectors flag degenerate with cosine 0") {
    auto d = gop::diagnostics(vec_grads({0.0, 0.0}), vec_grads({1.0, 0.0}));
    CHECK(d.cosine == 0.0);
    CHECK(d.degenerate);
  }
  SUBCASE("per-unit records carry names") {
    net::GradientSet gf, gr;
    gf.layers.push_back({"layer0", Matrix(1, 2, {1.0, 0.0}), {1.0}});
    gr.layers.push_back({"layer0", Matrix(1, 2, {0.0, 1.0}), {1.0}});
    auto d = gop::diagnostics(gf, gr);
    REQUIRE(d.units.size() == 2);
    CHECK(d.units[0].name == "layer0.weight");
    CHECK(d.units[1].name == "layer0.bias");
    CHECK(d.units[1].cosine == doctest::Approx(1.0));
  }
}

TEST_CASE("Theorem-4 identity over random pairs") {
  std::mt19937_64 rng(555);
  for (int t = 0; t < 300; ++t) {
    auto pair = testutil::random_grad_pair(rng);
    auto d = gop::diagnostics(pair.f, pair.r);
    if (d.degenerate) continue;
    CHECK(std::abs(d.forget_alignment - d.sin2_identity) <= 1e-9 * d.norm_f * d.norm_f + 1e-15);
    const double sin_phi = std::sqrt(std::max(0.0, 1.0 - d.cosine * d.cosine));
    if (sin_phi > 1e-6) CHECK(d.forget_alignment > 0.0);
  }
}

TEST_CASE("shape mismatch is rejected") {
  auto a = vec_grads({1.0, 2.0});
  auto b = vec_grads({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(gop::project_global(a, b, 1.0), std::invalid_argument);
  gop::ProjectionConfig cfg;
  CHECK_THROWS_AS(gop::project_layerwise(a, b, cfg), std::invalid_argument);
  CHECK_THROWS_AS(gop::diagnostics(a, b), std::invalid_argument);
}
