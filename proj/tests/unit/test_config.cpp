#include <gtest/gtest.h>

#include "ltof/config.hpp"
#include "ltof/io.hpp"

using namespace ltof;

TEST(ConfigDocument, ParsesSectionsValuesAndComments) {
  const auto doc = ConfigDocument::parse(
      "# top\n[problem]\nid = \"nonconvex_qp\"  # trailing\nn = 12\n\n[features]\nk = [1, 3]\n");
  EXPECT_EQ(doc.values.at("problem.id"), "\"nonconvex_qp\"");
  EXPECT_EQ(doc.values.at("problem.n"), "12");
  EXPECT_EQ(doc.values.at("features.k"), "[1, 3]");
}

TEST(ConfigDocument, RejectsMalformedLinesWithLineNumbers) {
  try {
    ConfigDocument::parse("[problem]\nid \"x\"\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  EXPECT_THROW(ConfigDocument::parse("[problem\n"), ConfigError);
  EXPECT_THROW(ConfigDocument::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
}

TEST(RunConfig, ReadsTypedValues) {
  const auto c = RunConfig::from_document(ConfigDocument::parse(
      "[problem]\nid = \"nonconvex_qp\"\nn = 12\nn_eq = 4\n[features]\nk = [1, 3]\n"
      "[train]\nlearning_rate = 0.01\nstop_metric = \"regret\"\n[model]\nbatchnorm = false\n"
      "[trainer.pdl]\nrho_max = 100\n"));
  EXPECT_EQ(c.problem.id, "nonconvex_qp");
  EXPECT_EQ(c.problem.n, 12u);
  EXPECT_EQ(c.features.k, (std::vector<std::size_t>{1, 3}));
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.stop_metric, trainers::StopMetric::kRegret);
  EXPECT_FALSE(c.model.batchnorm);
  EXPECT_DOUBLE_EQ(c.methods.pdl.rho_max, 100.0);
}

TEST(RunConfig, UnknownKeysAndBadTypesAreErrors) {
  EXPECT_THROW(RunConfig::from_document(ConfigDocument::parse("[problem]\nbogus = 1\n")), ConfigError);
  EXPECT_THROW(RunConfig::from_document(ConfigDocument::parse("[nosuch]\nx = 1\n")), ConfigError);
  EXPECT_THROW(RunConfig::from_document(ConfigDocument::parse("[problem]\nn = \"ten\"\n")), ConfigError);
  EXPECT_THROW(RunConfig::from_document(ConfigDocument::parse("[model]\nbatchnorm = 2\n")), ConfigError);
}

TEST(RunConfig, TomlRoundTripIsStable) {
  RunConfig c;
  c.problem.id = "nonconvex_qp";
  c.train.learning_rate = 3e-4;
  c.features.k = {2, 8};
  c.experiment.methods = {"ld", "two-stage"};
  c.resolve();
  const std::string text = c.to_toml();
  RunConfig back = RunConfig::from_document(ConfigDocument::parse(text));
  back.resolve();
  EXPECT_EQ(back.to_toml(), text);
}

TEST(RunConfig, ResolveFillsDefaultsAndValidates) {
  RunConfig c;
  c.resolve();
  EXPECT_EQ(c.problem.samples, 3000u);
  EXPECT_EQ(c.feature_width(), 30u);
  const auto methods = c.method_list();
  EXPECT_EQ(methods.front(), trainers::Method::kLd);
  EXPECT_EQ(std::count(methods.begin(), methods.end(), trainers::Method::kDc3), 0);

  RunConfig dc3;
  dc3.experiment.methods = {"dc3"};
  EXPECT_THROW(dc3.resolve(), ConfigError);
  dc3.dc3_eq_mode = true;
  EXPECT_NO_THROW(dc3.resolve());

  RunConfig bad;
  bad.model.dropout = 1.5;
  EXPECT_THROW(bad.resolve(), ConfigError);
  RunConfig method;
  method.experiment.methods = {"nope"};
  EXPECT_THROW(method.resolve(), ConfigError);
}

TEST(RunConfig, PaperScaleSetsLargeSizes) {
  RunConfig c;
  c.apply_paper_scale();
  c.resolve();
  EXPECT_EQ(c.problem.assets, 50u);
  EXPECT_EQ(c.problem.samples, 12000u);
  EXPECT_EQ(c.model.hidden_width, 500u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 1e-4);
  EXPECT_EQ(c.train.max_epochs, 300u);
}

TEST(RunConfig, SeedListStartsAtSeed) {
  RunConfig c;
  c.experiment.seed = 10;
  c.experiment.seeds = 3;
  EXPECT_EQ(c.seed_list(), (std::vector<std::uint64_t>{10, 11, 12}));
}

TEST(RunConfig, MissingFileIsAConfigError) {
  EXPECT_THROW(RunConfig::load("/nonexistent/ltof.toml"), ConfigError);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(content_hash("abc"), content_hash("abc"));
  EXPECT_NE(content_hash("abc"), content_hash("abd"));
  EXPECT_EQ(content_hash("").size(), 16u);
}
