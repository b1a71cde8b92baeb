#pragma once

// HTTP front end of the calibration workflow. JSON bodies throughout.
//
//   GET  /classes
//   GET  /classes/{tag}/top?n=
//   GET  /classes/{tag}/around?p=&n=
//   POST /classes/{tag}/bias        {"bias": 1.2}
//   POST /classes/{tag}/enabled     {"enabled": false}
//   POST /classes/{tag}/judgments   {"photo_id": "...", "verdict": "correct"}
//   GET  /classes/{tag}/suggest?p=
//   GET  /photos/{id}
//
// Errors come back as {"error": "..."} with 400 (bad request), 404
// (unknown tag or photo), 409 (disabled tag) or 422 (too few judgments).

#include <map>
#include <memory>
#include <string>

#include "yftag/calib.hpp"

namespace yftag::calib {

struct ServiceConfig {
  // Table is persisted here after every mutation when non-empty.
  std::string table_path;
  // Photo pixels are served from here by id.
  std::string photo_dir;
  SuggestOptions suggest;
  std::size_t default_n = 20;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Request handling without a transport; the server and tests call it.
class CalibrationService {
 public:
  CalibrationService(const ScoreIndex& index, CalibrationTable& table,
                     JudgmentLog& log, ServiceConfig config);

  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::map<std::string, std::string>& query,
                      const std::string& body);

 private:
  const ScoreIndex& index_;
  CalibrationTable& table_;
  JudgmentLog& log_;
  ServiceConfig config_;
};

class CalibrationServer {
 public:
  explicit CalibrationServer(CalibrationService& service);
  ~CalibrationServer();
  CalibrationServer(const CalibrationServer&) = delete;
  CalibrationServer& operator=(const CalibrationServer&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace yftag::calib
