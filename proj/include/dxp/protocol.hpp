#pragma once

// Line-delimited JSON protocol spoken with external oracle backends.
//
//   -> {"cmd":"hello"}
//   <- {"cmd":"hello","features":m,"classes":K}
//   -> {"cmd":"check","id":n,"epsilon":e,"norm":"l0|l1|l2|linf","fixed":[1-based...],"instance":[...],"label":c}
//   <- {"cmd":"answer","id":n,"found":true|false,"witness":[...]|null}
//   -> {"cmd":"cancel","id":n}
//   <- {"cmd":"answer","id":n,"found":null}          (cancelled)
//   -> {"cmd":"quit"}
//
// Backends may also reply {"cmd":"error","id":n,"message":"..."} for a check
// they cannot process. Unknown fields are ignored.

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "dxp/core.hpp"
#include "dxp/oracle.hpp"

namespace dxp::protocol {

using nlohmann::json;

struct CheckRequest {
  std::uint64_t id = 0;
  double epsilon = 0.0;
  Norm norm = Norm::L1;
  FeatureSet fixed;
  Point instance;
  std::size_t label = 0;
};

inline std::string hello_request() { return R"({"cmd":"hello"})"; }

inline std::string hello_reply(std::size_t features, std::size_t classes) {
  return json{{"cmd", "hello"}, {"features", features}, {"classes", classes}}.dump();
}

inline std::string check_request(const CheckRequest& r) {
  return json{{"cmd", "check"},
              {"id", r.id},
              {"epsilon", r.epsilon},
              {"norm", to_string(r.norm)},
              {"fixed", r.fixed.members()},
              {"instance", r.instance},
              {"label", r.label}}
      .dump();
}

inline std::string cancel_request(std::uint64_t id) { return json{{"cmd", "cancel"}, {"id", id}}.dump(); }

inline std::string quit_request() { return R"({"cmd":"quit"})"; }

inline std::string answer_reply(std::uint64_t id, const OracleAnswer& a) {
  json j{{"cmd", "answer"}, {"id", id}};
  if (a.cancelled()) {
    j["found"] = nullptr;
  } else {
    j["found"] = a.found();
    j["witness"] = a.witness ? json(*a.witness) : json(nullptr);
  }
  return j.dump();
}

inline std::string error_reply(std::uint64_t id, const std::string& message) {
  return json{{"cmd", "error"}, {"id", id}, {"message", message}}.dump();
}

// Throws ParseError on anything that is not a JSON object with a string "cmd".
inline json parse_message(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("protocol: malformed message: ") + e.what());
  }
  if (!j.is_object() || !j.contains("cmd") || !j["cmd"].is_string())
    throw ParseError("protocol: message without a \"cmd\" field");
  return j;
}

inline std::uint64_t message_id(const json& j) {
  if (!j.contains("id") || !j["id"].is_number_unsigned())
    throw ParseError("protocol: message without a numeric \"id\"");
  return j["id"].get<std::uint64_t>();
}

inline CheckRequest parse_check(const json& j) {
  CheckRequest r;
  try {
    r.id = message_id(j);
    r.epsilon = j.at("epsilon").get<double>();
    r.norm = parse_norm(j.at("norm").get<std::string>());
    r.fixed = FeatureSet(j.at("fixed").get<std::vector<std::size_t>>());
    r.instance = j.at("instance").get<Point>();
    r.label = j.at("label").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("protocol: bad check message: ") + e.what());
  } catch (const UsageError& e) {
    throw ParseError(std::string("protocol: bad check message: ") + e.what());
  }
  return r;
}

// Decodes an answer message into an OracleAnswer (found=null means cancelled).
inline OracleAnswer parse_answer(const json& j) {
  if (!j.contains("found"))
    throw ParseError("protocol: answer without \"found\"");
  const auto& f = j["found"];
  if (f.is_null())
    return OracleAnswer::cancelled_answer();
  if (!f.is_boolean())
    throw ParseError("protocol: \"found\" must be true, false or null");
  if (!f.get<bool>())
    return OracleAnswer::not_found();
  std::optional<Point> witness;
  if (j.contains("witness") && !j["witness"].is_null()) {
    try {
      witness = j["witness"].get<Point>();
    } catch (const json::exception&) {
      throw ParseError("protocol: \"witness\" must be an array of numbers or null");
    }
  }
  return OracleAnswer::found_at(std::move(witness));
}

}  // namespace dxp::protocol
