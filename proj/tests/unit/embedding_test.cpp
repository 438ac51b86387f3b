#include <gtest/gtest.h>

#include <cmath>

#include "fake_server.hpp"
#include "opmodel/embedding.hpp"
#include "opmodel/types.hpp"
#include "opmodel/error.hpp"

using namespace opmodel;
using namespace std::chrono_literals;

TEST(VectorMath, CosineAndNorm) {
  const Vector a{3, 4};
  const Vector b{6, 8};
  const Vector z{0, 0};
  EXPECT_DOUBLE_EQ(norm(a), 5.0);
  EXPECT_NEAR(cosine(a, b), 1.0, 1e-15);
  EXPECT_EQ(cosine(a, z), 0.0);
  EXPECT_THROW(cosine(a, Vector{1, 2, 3}), Error);
  Vector c{0, 2};
  normalize_in_place(c);
  EXPECT_EQ(c, (Vector{0, 1}));
}

TEST(HashEmbedder, DeterministicUnitVectors) {
  HashEmbedder e(64);
  const std::vector<std::string> texts{"minimize shipping cost", "Minimize  shipping COST!", "", "schedule nurses"};
  const auto v = e.embed(texts);
  ASSERT_EQ(v.size(), 4u);
  for (const auto& x : v) {
    ASSERT_EQ(x.size(), 64u);
    EXPECT_NEAR(norm(x), 1.0, 1e-12);
  }
  EXPECT_EQ(v[0], v[1]);  // case and punctuation do not matter
  EXPECT_EQ(v[2][0], 1.0);
  EXPECT_LT(cosine(v[0], v[3]), cosine(v[0], v[1]));
  EXPECT_EQ(e.call_count(), 1);
  EXPECT_EQ(e.embed(texts), v);
  EXPECT_EQ(e.id(), "hash-64");
  EXPECT_THROW(HashEmbedder(0), Error);
}

TEST(HashEmbedder, SimilarTextsScoreHigher) {
  HashEmbedder e(256);
  const std::vector<std::string> t{"transportation problem with warehouses and stores",
                                   "a transportation problem between warehouses and retail stores",
                                   "portfolio variance with expected return"};
  const auto v = e.embed(t);
  EXPECT_GT(cosine(v[0], v[1]), cosine(v[0], v[2]));
}

TEST(HttpEmbedder, ParsesAndNormalizes) {
  FakeServer server("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = opmodel::Json::parse(req.body);
    opmodel::Json data = opmodel::Json::array();
    for (std::size_t i = 0; i < body["input"].size(); ++i) {
      data.push_back({{"index", i}, {"embedding", {3.0 * static_cast<double>(i + 1), 4.0}}});
    }
    res.set_content(opmodel::Json{{"data", data}}.dump(), "application/json");
  });
  HttpEmbedderConfig cfg;
  cfg.endpoint = server.url("/v1/embeddings");
  cfg.dimension = 2;
  HttpEmbedder e(cfg);
  const std::vector<std::string> texts{"a", "b"};
  const auto v = e.embed(texts);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0][0], 0.6, 1e-12);
  EXPECT_NEAR(norm(v[1]), 1.0, 1e-12);
}

TEST(HttpEmbedder, WrongDimensionRejected) {
  FakeServer server("/e", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data": [{"embedding": [1, 2, 3]}]})", "application/json");
  });
  HttpEmbedderConfig cfg;
  cfg.endpoint = server.url("/e");
  cfg.dimension = 2;
  HttpEmbedder e(cfg);
  const std::vector<std::string> texts{"a"};
  try {
    e.embed(texts);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::DimensionMismatch);
  }
}

TEST(HttpEmbedder, RefusedPortIsUnavailable) {
  HttpEmbedderConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(unused_port()) + "/e";
  cfg.initial_backoff = 1ms;
  cfg.max_retries = 1;
  HttpEmbedder e(cfg);
  const std::vector<std::string> texts{"a"};
  EXPECT_THROW(e.embed(texts), Error);
}
