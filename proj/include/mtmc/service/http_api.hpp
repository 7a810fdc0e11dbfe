#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "mtmc/recommend.hpp"
#include "mtmc/service/annotation_service.hpp"
#include "mtmc/service/pipeline.hpp"

namespace httplib {
class Server;
}

namespace mtmc::service {

struct ServiceConfig {
  std::string broker_uri = "inproc://";
  std::filesystem::path store_path = "store";
  std::string listen_address = "127.0.0.1";
  int port = 8080;

  /// Reads an optional JSON file, then applies MTMC_BROKER_URI,
  /// MTMC_STORE_PATH, MTMC_LISTEN_ADDRESS and MTMC_PORT.
  static ServiceConfig load(const std::optional<std::filesystem::path>& file);
};

/// JSON-over-HTTP front end. Reads go straight to the store under a shared
/// lock; writes are funnelled through the AnnotationService writer queue.
/// The acting user comes from the X-User header ("anonymous" if absent).
class ApiServer {
 public:
  ApiServer(AnnotationService& annotations, CameraGraph graph, Pipeline* pipeline = nullptr);
  ~ApiServer();

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  AnnotationService& annotations_;
  CameraGraph graph_;
  Pipeline* pipeline_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace mtmc::service
