#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "alwig/error.hpp"
#include "alwig/scorer.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace alwig;

namespace {

ScorerConfig tiny_scorer(std::size_t layers = 1) {
  ScorerConfig c;
  c.video_dim = 6;
  c.hidden_dim = 8;
  c.shared_dim = 4;
  c.text_layers = layers;
  c.heads = 2;
  c.vocab_size = 20;
  c.max_text_len = 8;
  return c;
}

double norm(const Tensor& t) {
  double s = 0.0;
  for (double x : t.data()) s += x * x;
  return std::sqrt(s);
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Pairs whose video is a fixed random direction per title plus small noise.
std::vector<ScorerInput> correlated_pairs(std::size_t n, const ScorerConfig& c, std::mt19937_64& rng) {
  std::vector<ScorerInput> pairs;
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    ScorerInput p;
    p.video_id = "v" + std::to_string(i);
    p.title_tokens = testing::random_tokens(3 + i % 3, c.vocab_size, rng);
    p.title = "t" + std::to_string(i);
    std::vector<double> base(c.video_dim);
    for (auto& x : base) x = nd(rng);
    p.video.frames = 4;
    p.video.dim = c.video_dim;
    for (std::size_t f = 0; f < 4; ++f) {
      for (double b : base) p.video.values.push_back(b + 0.1 * nd(rng));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

TEST_CASE("temporal sampling") {
  CHECK(temporal_sample(16) == std::vector<std::size_t>{0, 2, 4, 6, 8, 10, 12, 14});
  CHECK(temporal_sample(5) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(temporal_sample(8).size() == 8);
  CHECK(temporal_sample(9) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK_THROWS_AS(temporal_sample(0), InputError);
  for (std::size_t n = 9; n < 100; ++n) {
    const auto idx = temporal_sample(n);
    CHECK(idx.size() == kScorerFrames);
    CHECK(std::is_sorted(idx.begin(), idx.end()));
    CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
    CHECK(idx.back() < n);
  }
}

TEST_CASE("video tower") {
  const auto cfg = tiny_scorer();
  TwoStreamModel model(cfg, 1);
  std::mt19937_64 rng(1);
  const auto one = testing::random_video(1, cfg.video_dim, rng);
  VideoClipFeatures many{16, cfg.video_dim, {}};
  for (int i = 0; i < 16; ++i) many.values.insert(many.values.end(), one.values.begin(), one.values.end());
  const auto a = values(model.encode_video(one));
  const auto b = values(model.encode_video(many));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);

  // With 16 frames only the even ones count.
  auto v16 = testing::random_video(16, cfg.video_dim, rng);
  VideoClipFeatures evens{8, cfg.video_dim, {}};
  for (std::size_t f = 0; f < 16; f += 2) {
    evens.values.insert(evens.values.end(), v16.values.begin() + f * cfg.video_dim,
                        v16.values.begin() + (f + 1) * cfg.video_dim);
  }
  const auto c = values(model.encode_video(v16));
  const auto d = values(model.encode_video(evens));
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == d[i]);

  for (int i = 0; i < 20; ++i) {
    CHECK(std::abs(norm(model.encode_video(testing::random_video(1 + i, cfg.video_dim, rng))) - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(model.encode_video(VideoClipFeatures{0, cfg.video_dim, {}}), InputError);
}

TEST_CASE("title tower") {
  const auto cfg = tiny_scorer();
  TwoStreamModel model(cfg, 2);
  std::mt19937_64 rng(2);
  const auto t = testing::random_tokens(5, cfg.vocab_size, rng);
  CHECK(values(model.encode_title(t)) == values(model.encode_title(t)));
  CHECK(std::abs(norm(model.encode_title(t)) - 1.0) <= 1e-9);
  CHECK_THROWS_AS(model.encode_title({}), InputError);

  const auto& ps = model.parameters();
  const auto emb = oracle::to_matrix(testing::param(ps, "text.token_embedding"));
  const auto pos = oracle::to_matrix(testing::param(ps, "text.positions"));
  oracle::Matrix x;
  TokenSequence ids{special::kCls};
  ids.insert(ids.end(), t.begin(), t.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto row = emb[static_cast<std::size_t>(ids[i])];
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += pos[i][j];
    x.push_back(row);
  }
  const auto h = testing::stack_forward(ps, "text", 1, cfg.heads, x, [](auto, auto) { return true; });
  const auto states = model.title_states(t);
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < h[i].size(); ++j) CHECK(std::abs(h[i][j] - states.at(i, j)) <= 1e-9);
  }
}

TEST_CASE("match_score") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(7), b(7);
    for (auto& x : a) x = nd(rng);
    for (auto& x : b) x = nd(rng);
    double na = 0, nb = 0;
    for (double x : a) na += x * x;
    for (double x : b) nb += x * x;
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    const double expected = dot / std::sqrt(na * nb);
    for (auto& x : a) x /= std::sqrt(na);
    for (auto& x : b) x /= std::sqrt(nb);
    CHECK(std::abs(match_score(a, b) - expected) <= 1e-12);
    CHECK(match_score(a, b) == match_score(b, a));
    CHECK(std::abs(match_score(a, a) - 1.0) <= 1e-12);
    auto neg = a;
    for (auto& x : neg) x = -x;
    CHECK(std::abs(match_score(a, neg) + 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(match_score(std::vector<double>{1.0}, std::vector<double>{1.0, 0.0}), DimensionError);
}

TEST_CASE("threshold partition") {
  std::vector<ScoredPair> three{{"a", "", 0.29, false}, {"b", "", 0.30, false}, {"c", "", 0.31, false}};
  const auto r = partition_by_score(three, 0.3);
  CHECK(r.removed == std::vector<std::size_t>{0});
  CHECK(r.kept == std::vector<std::size_t>{1, 2});
  CHECK_FALSE(r.scored[0].kept);
  CHECK(r.scored[1].kept);

  CHECK(partition_by_score(three, -1.0).kept.size() == 3);
  CHECK(partition_by_score({}, 0.3).scored.empty());
  CHECK_THROWS_AS(partition_by_score(three, 1.5), ArgumentError);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ScoredPair> pairs;
  for (int i = 0; i < 1000; ++i) pairs.push_back({"v" + std::to_string(i), "", u(rng), false});
  pairs[10].score = 0.3;
  std::size_t previous = pairs.size() + 1;
  for (double threshold : {-1.0, 0.0, 0.3, 0.9}) {
    const auto p = partition_by_score(pairs, threshold);
    CHECK(p.kept.size() + p.removed.size() == pairs.size());
    std::vector<std::size_t> all = p.kept;
    all.insert(all.end(), p.removed.begin(), p.removed.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
    CHECK(std::is_sorted(p.kept.begin(), p.kept.end()));
    CHECK(std::is_sorted(p.removed.begin(), p.removed.end()));
    for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(p.scored[i].kept == (pairs[i].score >= threshold));
    CHECK(p.kept.size() <= previous);
    previous = p.kept.size();
  }
  CHECK(partition_by_score(pairs, 0.3).scored[10].kept);
}

TEST_CASE("filter_dataset scores every pair deterministically") {
  const auto cfg = tiny_scorer();
  TwoStreamModel model(cfg, 5);
  std::mt19937_64 rng(5);
  const auto pairs = correlated_pairs(12, cfg, rng);
  const auto a = filter_dataset(pairs, model, 0.0);
  const auto b = filter_dataset(pairs, model, 0.0);
  REQUIRE(a.scored.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(a.scored[i].video_id == pairs[i].video_id);
    CHECK(a.scored[i].score == b.scored[i].score);
    CHECK(a.scored[i].score >= -1.0 - 1e-12);
    CHECK(a.scored[i].score <= 1.0 + 1e-12);
  }
  CHECK(a.kept == b.kept);
  CHECK(filter_dataset({}, model).scored.empty());
}

TEST_CASE("two-stream training") {
  const auto cfg = tiny_scorer();
  std::mt19937_64 rng(6);

  SUBCASE("zero epochs leaves parameters unchanged") {
    TwoStreamModel model(cfg, 6);
    std::vector<std::vector<double>> before;
    for (const auto& p : model.parameters()) before.push_back(values(p.value));
    ScorerTrainOptions opt;
    opt.epochs = 0;
    CHECK(train_two_stream(model, correlated_pairs(4, cfg, rng), opt).empty());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(values(model.parameters()[i].value) == before[i]);
  }
  SUBCASE("fewer than two pairs is an error") {
    TwoStreamModel model(cfg, 6);
    CHECK_THROWS_AS(train_two_stream(model, correlated_pairs(1, cfg, rng), {}), ArgumentError);
  }
  SUBCASE("loss never rises while memorizing eight pairs") {
    TwoStreamModel model(cfg, 7);
    ScorerTrainOptions opt;
    opt.epochs = 20;
    opt.batch_size = 8;
    opt.schedule = {0, 2e-3, 2e-3, 20};
    const auto losses = train_two_stream(model, correlated_pairs(8, cfg, rng), opt);
    REQUIRE(losses.size() == 20);
    for (std::size_t e = 1; e < losses.size(); ++e) {
      INFO("epoch " << e);
      CHECK(losses[e] <= losses[e - 1]);
    }
  }
  SUBCASE("training separates matched from mismatched pairs") {
    TwoStreamModel model(cfg, 8);
    const auto pairs = correlated_pairs(16, cfg, rng);
    ScorerTrainOptions opt;
    opt.epochs = 60;
    opt.batch_size = 8;
    opt.schedule = {5, 3e-3, 3e-4, 60};
    train_two_stream(model, pairs, opt);
    NoGradGuard no_grad;
    std::vector<Tensor> vs, ts;
    for (const auto& p : pairs) {
      vs.push_back(model.encode_video(p.video));
      ts.push_back(model.encode_title(p.title_tokens));
    }
    double matched = 0, mismatched = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (std::size_t j = 0; j < pairs.size(); ++j) {
        const double s = match_score(vs[i].data(), ts[j].data());
        (i == j ? matched : mismatched) += s;
      }
    }
    matched /= 16.0;
    mismatched /= 16.0 * 15.0;
    CHECK(matched > mismatched + 0.3);
  }
}

TEST_CASE("scorer config metadata round trip") {
  const auto c = tiny_scorer(2);
  CHECK(ScorerConfig::from_metadata(c.to_metadata()) == c);
  auto bad = c;
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}
