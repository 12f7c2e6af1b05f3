#pragma once

// JSON-over-HTTP front end for trained models and the pump panels.
//
//   GET  /health                      service status and model count
//   GET  /spec                        OpenAPI description
//   GET  /models                      loaded model ids
//   POST /models                      load a model (JSON path, multipart or raw bytes)
//   GET  /models/{id}                 model metadata
//   POST /models/{id}/evaluate        reconstructed field stats (+ strided values)
//   GET  /pump/forward?omega&pf       head at (w, PF)
//   GET  /pump/inverse?omega&dp       flow at (w, dP)   [panel 1, panel 2 predict]
//   GET  /pump/calibrate?omega&pf     ramp-test head    [panel 2 calibrate]
//   GET  /pump/curve?omega&n          dP-PF curve samples

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "podi/pipeline.hpp"
#include "podi/pump.hpp"

namespace httplib {
class Server;
}

namespace podi::service {

struct Config {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> model_dir;
  std::size_t max_payload_bytes = std::size_t{512} << 20;
  std::size_t threads = 16;  // request worker pool
  pump::Curve curve;
};

/// Load-once map from id to immutable model; concurrent reads, exclusive inserts.
class ModelRegistry {
 public:
  std::shared_ptr<const RomModel> get(const std::string& id) const;
  /// False if `id` is already taken.
  bool insert(const std::string& id, std::shared_ptr<const RomModel> model);
  std::vector<std::string> ids() const;
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const RomModel>> models_;
};

/// Metadata document returned by GET /models/{id}.
std::string model_metadata_json(const std::string& id, const RomModel& model);

class RomService {
 public:
  explicit RomService(Config config);
  ~RomService();

  RomService(const RomService&) = delete;
  RomService& operator=(const RomService&) = delete;

  ModelRegistry& registry() { return registry_; }

  /// Parses and registers a serialized model. Throws Error(CorruptModel /
  /// VersionMismatch) or InvalidArgument for a duplicate id. Without an
  /// explicit id, the id is "m" followed by the file's CRC-32 in hex.
  std::string add_model(std::span<const std::uint8_t> bytes, std::optional<std::string> id = {});

  /// Loads every *.podi file in the configured model directory (id = file stem).
  void load_model_directory();

  /// Binds the listening socket; returns the bound port.
  int bind();
  /// Serves on the bound socket until stop(); blocks.
  void listen();
  /// bind() + listen() on a background thread.
  int start();
  void stop();

 private:
  void install_routes();

  Config config_;
  ModelRegistry registry_;
  std::unique_ptr<httplib::Server> server_;
  std::thread worker_;
  int bound_port_ = -1;
};

}  // namespace podi::service
