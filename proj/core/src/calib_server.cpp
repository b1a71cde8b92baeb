#include "yftag/calib_server.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "yftag/multilabel.hpp"

namespace yftag::calib {
namespace {

using nlohmann::json;

class BadRequest : public Error {
 public:
  using Error::Error;
};

HttpResponse reply(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_reply(int status, const std::string& message) {
  return reply(status, json{{"error", message}});
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto slash = path.find('/', start);
    if (slash == std::string::npos) slash = path.size();
    if (slash > start) parts.push_back(path.substr(start, slash - start));
    start = slash + 1;
  }
  return parts;
}

double query_double(const std::map<std::string, std::string>& q,
                    const std::string& key, std::optional<double> fallback) {
  auto it = q.find(key);
  if (it == q.end()) {
    if (fallback) return *fallback;
    throw BadRequest("missing query parameter '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw BadRequest("bad value for '" + key + "'");
  }
}

double query_probability(const std::map<std::string, std::string>& q) {
  const double p = query_double(q, "p", 0.9);
  if (!(p > 0.0 && p < 1.0)) throw BadRequest("'p' must lie in (0, 1)");
  return p;
}

std::size_t query_count(const std::map<std::string, std::string>& q,
                        const std::string& key, std::size_t fallback) {
  auto it = q.find(key);
  if (it == q.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size() || v < 1) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw BadRequest("'" + key + "' must be a positive integer");
  }
}

json parse_body(const std::string& body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw BadRequest("body must be a JSON object");
    return j;
  } catch (const json::exception&) {
    throw BadRequest("body is not valid JSON");
  }
}

json class_json(const std::string& tag, const TagCalibration& c,
                std::size_t photos, std::size_t judgments) {
  return {{"tag", tag},           {"bias", c.bias},
          {"enabled", c.enabled}, {"modified", c.modified},
          {"photos", photos},     {"judgments", judgments}};
}

json items_json(const std::string& tag, double bias,
                const std::vector<PosteriorItem>& items) {
  json list = json::array();
  for (const auto& it : items) {
    list.push_back({{"photo_id", it.photo_id},
                    {"logit", it.logit},
                    {"posterior", it.posterior}});
  }
  return {{"tag", tag}, {"bias", bias}, {"photos", list}};
}

bool safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.')) {
      return false;
    }
  }
  return true;
}

}  // namespace

CalibrationService::CalibrationService(const ScoreIndex& index,
                                       CalibrationTable& table,
                                       JudgmentLog& log, ServiceConfig config)
    : index_(index), table_(table), log_(log), config_(std::move(config)) {
  for (const auto& tag : index_.tags()) table_.add_tag(tag);
}

HttpResponse CalibrationService::handle(
    const std::string& method, const std::string& path,
    const std::map<std::string, std::string>& query, const std::string& body) {
  try {
    const auto parts = split_path(path);
    if (parts.size() == 1 && parts[0] == "classes" && method == "GET") {
      json list = json::array();
      for (const auto& [tag, c] : table_.entries()) {
        const std::size_t n = index_.has_tag(tag) ? index_.photos(tag).size() : 0;
        list.push_back(class_json(tag, c, n, log_.count(tag)));
      }
      return reply(200, json{{"classes", list}});
    }
    if (parts.size() == 2 && parts[0] == "photos" && method == "GET") {
      namespace fs = std::filesystem;
      const std::string& id = parts[1];
      if (!safe_id(id) || config_.photo_dir.empty()) {
        return error_reply(404, "no photo '" + id + "'");
      }
      static const std::pair<const char*, const char*> kTypes[] = {
          {".jpg", "image/jpeg"},
          {".jpeg", "image/jpeg"},
          {".png", "image/png"},
          {".ppm", "image/x-portable-pixmap"},
          {".pgm", "image/x-portable-graymap"}};
      for (const auto& [ext, type] : kTypes) {
        const fs::path file = fs::path(config_.photo_dir) / (id + ext);
        if (!fs::is_regular_file(file)) continue;
        std::ifstream in(file, std::ios::binary);
        std::ostringstream data;
        data << in.rdbuf();
        return {200, type, data.str()};
      }
      return error_reply(404, "no photo '" + id + "'");
    }
    if (parts.size() != 3 || parts[0] != "classes") {
      return error_reply(404, "no route " + method + " " + path);
    }
    const std::string& tag = parts[1];
    const std::string& action = parts[2];
    if (!table_.has_tag(tag)) return error_reply(404, "unknown tag '" + tag + "'");

    if (method == "GET" && action == "top") {
      auto items = top_scoring(index_, table_, tag,
                               query_count(query, "n", config_.default_n));
      return reply(200, items_json(tag, table_.get(tag).bias, items));
    }
    if (method == "GET" && action == "around") {
      const double p = query_probability(query);
      auto items = around_posterior(index_, table_, tag, p,
                                    query_count(query, "n", config_.default_n));
      return reply(200, items_json(tag, table_.get(tag).bias, items));
    }
    if (method == "GET" && action == "suggest") {
      const double p = query_probability(query);
      const auto s = suggest_bias(index_, log_, tag, p, config_.suggest);
      return reply(200, json{{"tag", tag},
                             {"target", p},
                             {"bias", s.bias},
                             {"unconstrained", s.unconstrained},
                             {"precision", s.precision},
                             {"window_count", s.window_count},
                             {"judged", s.judged}});
    }
    if (method == "POST" && action == "bias") {
      const json j = parse_body(body);
      if (!j.contains("bias") || !j["bias"].is_number()) {
        throw BadRequest("body needs a numeric 'bias'");
      }
      table_.set_bias(tag, j["bias"].get<double>());
    } else if (method == "POST" && action == "enabled") {
      const json j = parse_body(body);
      const char* key = j.contains("enabled") ? "enabled" : "flag";
      if (!j.contains(key) || !j[key].is_boolean()) {
        throw BadRequest("body needs a boolean 'enabled'");
      }
      table_.set_enabled(tag, j[key].get<bool>());
    } else if (method == "POST" && action == "judgments") {
      const json j = parse_body(body);
      if (!j.contains("photo_id") || !j["photo_id"].is_string() ||
          !j.contains("verdict") || !j["verdict"].is_string()) {
        throw BadRequest("body needs string 'photo_id' and 'verdict'");
      }
      const auto photo = j["photo_id"].get<std::string>();
      if (!index_.logit(tag, photo)) {
        return error_reply(404, "photo '" + photo + "' not scored for '" + tag + "'");
      }
      Verdict v;
      try {
        v = parse_verdict(j["verdict"].get<std::string>());
      } catch (const ParseError& e) {
        throw BadRequest(e.what());
      }
      log_.record({tag, photo, v, now_millis()});
      return reply(200, json{{"tag", tag}, {"judgments", log_.count(tag)}});
    } else {
      return error_reply(404, "no route " + method + " " + path);
    }
    if (!config_.table_path.empty()) table_.persist(config_.table_path);
    return reply(200, class_json(tag, table_.get(tag), index_.photos(tag).size(),
                                 log_.count(tag)));
  } catch (const BadRequest& e) {
    return error_reply(400, e.what());
  } catch (const NotFoundError& e) {
    return error_reply(404, e.what());
  } catch (const DisabledTag& e) {
    return error_reply(409, e.what());
  } catch (const InsufficientJudgments& e) {
    return error_reply(422, e.what());
  } catch (const NumericError& e) {
    return error_reply(400, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

struct CalibrationServer::Impl {
  explicit Impl(CalibrationService& s) : service(s) {}
  CalibrationService& service;
  httplib::Server server;
};

CalibrationServer::CalibrationServer(CalibrationService& service)
    : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const HttpResponse r =
        impl_->service.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
}

CalibrationServer::~CalibrationServer() { stop(); }

int CalibrationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void CalibrationServer::serve() { impl_->server.listen_after_bind(); }

void CalibrationServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace yftag::calib
