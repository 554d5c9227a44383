#include <gtest/gtest.h>

#include <thread>

#include "dxp/oracles/exhaustive.hpp"
#include "dxp/oracles/external.hpp"
#include "dxp/predicates.hpp"
#include "support.hpp"

using namespace dxp;

namespace {

std::string backend(const std::string& model, const std::string& extra = "") {
  return std::string("'") + DXP_BACKEND + "' --model '" + test::fixture(model) + "' " + extra;
}

OracleQuery query(double eps, Norm n, FeatureSet fixed, std::stop_token st = {}) {
  return OracleQuery{eps, n, std::move(fixed), std::move(st)};
}

OracleError::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const OracleError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no oracle error";
  return OracleError::Kind::Resource;
}

}  // namespace

TEST(External, HandshakeAndQuery) {
  const auto p = test::running_example();
  ExternalOracle o(p, {backend("running.json")});
  EXPECT_EQ(o.features(), 3u);
  EXPECT_EQ(o.classes(), 2u);
  const auto a = o.find_adv_ex(query(1, Norm::L1, {2, 3}));
  ASSERT_TRUE(a.found());
  EXPECT_EQ(*a.witness, (Point{0, 1, 1}));
  EXPECT_TRUE(check_wcxp(p, o, {1}, 1, Norm::L1).holds);
  EXPECT_FALSE(check_wcxp(p, o, {2, 3}, 1, Norm::L1).holds);
}

TEST(External, MatchesInProcess) {
  const auto p = test::running_example();
  ExternalOracle o(p, {backend("running.json")});
  for (std::size_t mask = 0; mask < 8; ++mask)
    for (auto n : {Norm::L0, Norm::L1, Norm::LInf}) {
      const auto fixed = test::from_mask(static_cast<test::Mask>(mask), 3);
      const auto q = query(1, n, fixed);
      const auto a = o.find_adv_ex(q), b = exhaustive_find(p, q);
      EXPECT_EQ(a.verdict, b.verdict);
      EXPECT_EQ(a.witness, b.witness);
    }
}

TEST(External, HandshakeMismatch) {
  const auto p = test::running_example();
  EXPECT_EQ(kind_of([&] { ExternalOracle o(p, {backend("and.json")}); }), OracleError::Kind::Protocol);
}

TEST(External, BackendCrash) {
  const auto p = test::running_example();
  EXPECT_EQ(kind_of([&] { ExternalOracle o(p, {"exit 3"}); }), OracleError::Kind::BackendCrash);
  // answers the handshake, then dies on the first check
  ExternalOracle o(p, {R"(read l; echo '{"cmd":"hello","features":3,"classes":2}'; read l; exit 1)"});
  EXPECT_EQ(kind_of([&] { o.find_adv_ex(query(1, Norm::L1, {})); }), OracleError::Kind::BackendCrash);
}

TEST(External, MalformedReply) {
  const auto p = test::running_example();
  ExternalOracle o(p, {R"(read l; echo '{"cmd":"hello","features":3,"classes":2}'; read l; echo 'garbage'; sleep 5)"});
  EXPECT_EQ(kind_of([&] { o.find_adv_ex(query(1, Norm::L1, {})); }), OracleError::Kind::Protocol);
}

TEST(External, InvalidWitnessIsRejected) {
  const auto p = test::running_example();
  ExternalOracle o(p, {R"(read l; echo '{"cmd":"hello","features":3,"classes":2}';
                          read l; echo '{"cmd":"answer","id":1,"found":true,"witness":[1,1,1]}'; sleep 5)"});
  EXPECT_EQ(kind_of([&] { check_wcxp(p, o, {1, 2, 3}, 1, Norm::L1); }), OracleError::Kind::Protocol);
}

TEST(External, ErrorReply) {
  const auto p = test::running_example();
  ExternalOracle o(p, {R"(read l; echo '{"cmd":"hello","features":3,"classes":2}';
                          read l; echo '{"cmd":"error","id":1,"message":"nope"}'; sleep 5)"});
  EXPECT_EQ(kind_of([&] { o.find_adv_ex(query(1, Norm::L1, {})); }), OracleError::Kind::Protocol);
}

TEST(External, Timeout) {
  const auto p = test::running_example();
  ExternalOracle o(p, {backend("running.json", "--delay-ms 5000"), std::chrono::milliseconds(100)});
  EXPECT_EQ(kind_of([&] { o.find_adv_ex(query(1, Norm::L1, {})); }), OracleError::Kind::Timeout);
}

TEST(External, CancelMidQueryKeepsSessionUsable) {
  const auto p = test::running_example();
  ExternalOracle o(p, {backend("running.json", "--delay-ms 1000")});
  std::stop_source stop;
  std::jthread canceller([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    stop.request_stop();
  });
  Stopwatch clock;
  EXPECT_TRUE(o.find_adv_ex(query(1, Norm::L1, {}, stop.get_token())).cancelled());
  EXPECT_LT(clock.elapsed(), std::chrono::milliseconds(900));
  canceller.join();
  const auto again = o.find_adv_ex(query(1, Norm::L1, {2, 3}));
  EXPECT_TRUE(again.found());
}

TEST(External, ConcurrentQueries) {
  const auto p = test::running_example();
  ExternalOracle o(p, {backend("running.json", "--delay-ms 200")});
  std::vector<OracleAnswer> answers(4);
  Stopwatch clock;
  {
    std::vector<std::jthread> ts;
    for (std::size_t k = 0; k < 4; ++k)
      ts.emplace_back([&, k] { answers[k] = o.find_adv_ex(query(1, Norm::L1, k % 2 ? FeatureSet{1} : FeatureSet{})); });
  }
  EXPECT_LT(clock.elapsed(), std::chrono::milliseconds(700));
  for (std::size_t k = 0; k < 4; ++k)
    EXPECT_EQ(answers[k].found(), k % 2 == 0);
}
