#include <gtest/gtest.h>

#include <filesystem>

#include "dxp/model_io.hpp"
#include "support.hpp"

using namespace dxp;

TEST(Expr, ParsesAndEvaluates) {
  const auto e = Expr::parse("0 < x1 < 2 && 4 * x1 >= x2 + x3");
  EXPECT_TRUE(e.is_boolean());
  EXPECT_EQ(e.max_feature(), 3u);
  EXPECT_TRUE(e.holds({1, 1, 1}));
  EXPECT_FALSE(e.holds({0, 1, 1}));
  EXPECT_FALSE(e.holds({2, 1, 1}));
  EXPECT_FALSE(e.holds({0.5, 2, 1}));
  EXPECT_TRUE(Expr::parse("!(x1 == 1) || -x2 / 2 != 3").holds({1, 0}));
  EXPECT_EQ(Expr::parse(e.to_string()), e);
}

TEST(Expr, ParseErrors) {
  EXPECT_THROW(Expr::parse("x1 <"), ParseError);
  EXPECT_THROW(Expr::parse("x0 > 1"), ParseError);
  EXPECT_THROW(Expr::parse("(x1 > 1"), ParseError);
  EXPECT_THROW(Expr::parse("x1 $ 2"), ParseError);
}

TEST(Models, Predict) {
  const auto p = test::running_example();
  EXPECT_EQ(predict(p.model(), {1, 1, 1}), 1u);
  EXPECT_EQ(predict(p.model(), {0, 1, 1}), 0u);
  const Model lin = LinearModel({{3, -1}, {-3, 1}}, {0, 0});
  EXPECT_EQ(predict(lin, {1, 1}), 0u);
  EXPECT_DOUBLE_EQ(score(lin, {1, 1}, 0), 2.0);
  EXPECT_THROW(predict(lin, {1}), UsageError);
}

TEST(Models, Scores) {
  const Model mlp = MlpModel({DenseLayer{{{1, 0}, {0, 1}}, {0, 0}, Activation::Identity}});
  EXPECT_DOUBLE_EQ(score(mlp, {0.3, 0.7}, 1), 0.7);
  const Model relu = MlpModel({DenseLayer{{{1, 0}, {0, 1}}, {0, 0}, Activation::Relu},
                               DenseLayer{{{1, 1}, {0, 0}}, {0, 0.5}, Activation::Identity}});
  EXPECT_DOUBLE_EQ(score(relu, {-1, 2}, 0), 2.0);
  try {
    score(test::running_example().model(), {1, 1, 1}, 0);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("no scores"), std::string::npos);
  }
}

TEST(Models, TiesGoToLowestClass) {
  const Model lin = LinearModel({{1}, {1}}, {0, 0});
  EXPECT_EQ(predict(lin, {5}), 0u);
}

TEST(ModelIo, LinearRoundTripIsExact) {
  const Model lin = LinearModel({{0.1, 1.0 / 3}, {-2e-17, 7}}, {0.3, -1});
  const auto space = FeatureSpace({RealInterval{}, RealInterval{-1.0, std::nullopt}});
  const auto back = parse_model(dump_model(lin, space));
  EXPECT_EQ(std::get<LinearModel>(*back.model), std::get<LinearModel>(lin));
  EXPECT_EQ(back.space, space);
}

TEST(ModelIo, FixturesRoundTrip) {
  for (auto name : {"running.json", "and.json", "or.json", "and4.json", "constant.json", "linear.json"}) {
    const auto mf = load_model(test::fixture(name));
    const auto again = parse_model(dump_model(*mf.model, mf.space));
    EXPECT_EQ(*again.model, *mf.model) << name;
    EXPECT_EQ(again.space, mf.space) << name;
  }
}

TEST(ModelIo, MlpRoundTrip) {
  const Model mlp = MlpModel({DenseLayer{{{1, -2}}, {0.5}, Activation::Relu},
                              DenseLayer{{{1}, {-1}}, {0, 0}, Activation::Identity}});
  const auto back = parse_model(dump_model(mlp, FeatureSpace::reals(2)));
  EXPECT_EQ(*back.model, mlp);
}

TEST(ModelIo, ErrorsNameTheField) {
  auto expect_msg = [](const std::string& text, const std::string& needle) {
    try {
      parse_model(text);
      FAIL() << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_msg("{", "model");
  expect_msg(R"({"kind":"linear","num_features":2,"num_classes":2,"domains":[{"type":"real"},{"type":"real"}],
               "weights":[[1,2],[3]],"biases":[0,0]})",
             "weights");
  expect_msg(R"({"kind":"linear","num_features":2,"num_classes":2,"domains":[{"type":"real"},{"type":"real"}],
               "biases":[0,0]})",
             "weights");
  expect_msg(R"({"kind":"tree","num_features":1,"num_classes":2,"domains":[{"type":"real"}]})", "kind");
  expect_msg(R"({"kind":"predicate","num_features":1,"num_classes":2,"domains":[{"type":"real"}],
               "rules":[{"if":"x1 >","class":1}],"otherwise":0})",
             "rules[0].if");
}

TEST(ModelIo, ArityMismatchIsValidationError) {
  EXPECT_THROW(parse_model(R"({"kind":"linear","num_features":3,"num_classes":2,
      "domains":[{"type":"real"},{"type":"real"},{"type":"real"}],"weights":[[1,2],[3,4]],"biases":[0,0]})"),
               ValidationError);
  EXPECT_THROW(parse_model(R"({"kind":"linear","num_features":2,"num_classes":2,
      "domains":[{"type":"real"}],"weights":[[1,2],[3,4]],"biases":[0,0]})"),
               ValidationError);
}

TEST(ModelIo, SaveLoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "dxp_model_io_test.json";
  const Model lin = LinearModel({{3, -1}, {0, 0}}, {0, 0});
  save_model(lin, FeatureSpace::reals(2), path.string());
  EXPECT_EQ(*load_model(path.string()).model, lin);
  std::filesystem::remove(path);
  EXPECT_THROW(load_model(path.string()), Error);
}

TEST(ModelIo, Instance) {
  const auto inst = parse_instance(R"({"point":[1,0.5],"label":1})");
  EXPECT_EQ(inst.point, (Point{1, 0.5}));
  EXPECT_EQ(inst.label, 1u);
  EXPECT_EQ(parse_instance(dump_instance(inst)).point, inst.point);
  EXPECT_THROW(parse_instance(R"({"point":[1]})"), ParseError);
}
