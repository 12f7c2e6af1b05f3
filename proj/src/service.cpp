#include "podi/service.hpp"

#include <cstdio>
#include <mutex>

#include "binary.hpp"
#include "httplib.h"
#include "json.hpp"
#include "podi/checksum.hpp"

namespace podi::service {

namespace {

using nlohmann::json;

json vector_json(const Vector<double>& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view reason, const std::string& message,
                json extra = json::object()) {
  extra["error"] = reason;
  extra["message"] = message;
  send_json(res, status, extra);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownField: return 404;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ParameterOutOfRange:
    case ErrorCode::NoRealRoot:
    case ErrorCode::FlowOutOfRange:
    case ErrorCode::AmbiguousRoot: return 422;
    default: return 400;
  }
}

/// No Accept header, or one naming application/json, application/* or */*.
bool accepts_json(const httplib::Request& req) {
  if (!req.has_header("Accept")) return true;
  const auto header = req.get_header_value("Accept");
  std::size_t start = 0;
  while (start <= header.size()) {
    auto end = header.find(',', start);
    if (end == std::string::npos) end = header.size();
    std::string range = header.substr(start, end - start);
    range = range.substr(0, range.find(';'));
    const auto first = range.find_first_not_of(" \t");
    const auto last = range.find_last_not_of(" \t");
    if (first != std::string::npos) {
      range = range.substr(first, last - first + 1);
      if (range == "*/*" || range == "application/*" || range == "application/json") return true;
    }
    start = end + 1;
  }
  return false;
}

double query_double(const httplib::Request& req, const std::string& key) {
  if (!req.has_param(key)) {
    throw Error(ErrorCode::InvalidArgument, "missing query parameter '" + key + "'");
  }
  const auto text = req.get_param_value(key);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::InvalidArgument, "query parameter '" + key + "' is not a finite number");
  }
  return value;
}

json range_json(const ParameterRange& r) {
  return {{"lower", vector_json(r.lower)}, {"upper", vector_json(r.upper)}};
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

json openapi_document() {
  auto op = [](std::string summary) { return json{{"summary", std::move(summary)}}; };
  json paths = {
      {"/health", {{"get", op("Service status and number of loaded models")}}},
      {"/spec", {{"get", op("This document")}}},
      {"/models",
       {{"get", op("List loaded model ids")},
        {"post", op("Load a model: JSON {path, id?}, multipart field 'model' (+ 'id'), or raw "
                    "application/octet-stream with ?id=. 201 on success, 400 corrupt, 409 duplicate id")}}},
      {"/models/{id}", {{"get", op("Model metadata: fields, rank per field, N, N_s, parameter ranges")}}},
      {"/models/{id}/evaluate",
       {{"post", op("Body {field, parameter, stride?}. Returns field stats over the full vector, "
                    "optional strided values, and an extrapolated flag. 404 unknown model/field, "
                    "422 dimension or declared-range violation")}}},
      {"/pump/forward", {{"get", op("Query omega [rpm], pf [l/min] -> dp [mmHg]")}}},
      {"/pump/inverse", {{"get", op("Query omega, dp -> pf; 422 NoRealRoot / FlowOutOfRange with pf")}}},
      {"/pump/calibrate", {{"get", op("Query measured omega, pf -> dp held for later inverse calls")}}},
      {"/pump/curve", {{"get", op("Query omega, n -> n (pf, dp) samples over the admissible range")}}},
  };
  return {{"openapi", "3.0.3"},
          {"info", {{"title", "PODI reduced-order model service"}, {"version", "1"}}},
          {"paths", std::move(paths)}};
}

}  // namespace

std::shared_ptr<const RomModel> ModelRegistry::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = models_.find(id);
  return it == models_.end() ? nullptr : it->second;
}

bool ModelRegistry::insert(const std::string& id, std::shared_ptr<const RomModel> model) {
  std::unique_lock lock(mutex_);
  return models_.emplace(id, std::move(model)).second;
}

std::vector<std::string> ModelRegistry::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : models_) out.push_back(id);
  return out;
}

std::size_t ModelRegistry::size() const {
  std::shared_lock lock(mutex_);
  return models_.size();
}

std::string model_metadata_json(const std::string& id, const RomModel& model) {
  json fields = json::array();
  for (const auto& f : model.fields()) {
    fields.push_back({{"label", f.label},
                      {"k", f.rank()},
                      {"n_dof", f.n_dof()},
                      {"cumulative_energy", vector_json(cumulative_energy(f.spectrum))}});
  }
  json doc = {{"id", id},
              {"format_version", model.format_version()},
              {"n_snapshots", model.n_snapshots()},
              {"parameter_dim", model.parameter_dim()},
              {"energy_threshold", model.energy_threshold()},
              {"parameter_range", range_json(model.training_box())},
              {"declared_range", model.declared_range() ? range_json(*model.declared_range()) : json()},
              {"fields", std::move(fields)}};
  return doc.dump();
}

RomService::RomService(Config config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  pump::check(config_.curve);
  server_->set_payload_max_length(config_.max_payload_bytes);
  const auto threads = config_.threads > 0 ? config_.threads : std::size_t{16};
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  install_routes();
}

RomService::~RomService() { stop(); }

std::string RomService::add_model(std::span<const std::uint8_t> bytes, std::optional<std::string> id) {
  auto model = std::make_shared<const RomModel>(deserialize_model(bytes));
  const auto key = id && !id->empty() ? *id : "m" + hex32(crc32(bytes));
  if (!registry_.insert(key, std::move(model))) {
    throw Error(ErrorCode::InvalidArgument, "model id '" + key + "' is already loaded");
  }
  return key;
}

void RomService::load_model_directory() {
  if (!config_.model_dir) return;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*config_.model_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".podi") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) add_model(detail::read_file(path), path.stem().string());
}

int RomService::bind() {
  if (config_.port == 0) {
    bound_port_ = server_->bind_to_any_port(config_.host);
  } else {
    bound_port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (bound_port_ < 0) {
    throw Error(ErrorCode::IoFailure,
                "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return bound_port_;
}

void RomService::listen() { server_->listen_after_bind(); }

int RomService::start() {
  const int port = bind();
  worker_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return port;
}

void RomService::stop() {
  if (server_) server_->stop();
  if (worker_.joinable()) worker_.join();
}

void RomService::install_routes() {
  auto& srv = *server_;

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  srv.set_pre_routing_handler([](const httplib::Request& req, httplib::Response& res) {
    if (req.method == "OPTIONS") {
      res.status = 204;
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Accept");
      return httplib::Server::HandlerResponse::Handled;
    }
    if (!accepts_json(req)) {
      res.status = 406;
      res.set_content("only application/json responses are available", "text/plain");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      json extra = json::object();
      if (e.value()) extra["value"] = *e.value();
      send_error(res, status_for(e.code()), to_string(e.code()), e.what(), extra);
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    }
  });

  srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"models", registry_.size()}});
  });

  srv.Get("/spec", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, openapi_document());
  });

  srv.Get("/models", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"models", registry_.ids()}});
  });

  srv.Post("/models", [this](const httplib::Request& req, httplib::Response& res) {
    std::vector<std::uint8_t> bytes;
    std::optional<std::string> id;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("model")) {
        return send_error(res, 400, "InvalidArgument", "multipart upload needs a 'model' part");
      }
      const auto part = req.get_file_value("model");
      bytes.assign(part.content.begin(), part.content.end());
      if (req.has_file("id")) id = req.get_file_value("id").content;
    } else if (req.get_header_value("Content-Type").starts_with("application/json")) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_error(res, 400, "InvalidArgument", std::string("invalid JSON: ") + e.what());
      }
      if (!body.contains("path") || !body["path"].is_string()) {
        return send_error(res, 400, "InvalidArgument", "JSON body needs a string 'path'");
      }
      std::filesystem::path path = body["path"].get<std::string>();
      if (path.is_relative() && config_.model_dir) path = *config_.model_dir / path;
      bytes = detail::read_file(path);
      if (body.contains("id") && body["id"].is_string()) id = body["id"].get<std::string>();
    } else {
      bytes.assign(req.body.begin(), req.body.end());
      if (req.has_param("id")) id = req.get_param_value("id");
    }

    std::shared_ptr<const RomModel> model;
    try {
      model = std::make_shared<const RomModel>(deserialize_model(bytes));
    } catch (const Error& e) {
      return send_error(res, 400, to_string(e.code()), e.what());
    }
    const auto key = id && !id->empty() ? *id : "m" + hex32(crc32(bytes));
    if (!registry_.insert(key, model)) {
      return send_error(res, 409, "DuplicateId", "model id '" + key + "' is already loaded",
                        {{"id", key}});
    }
    res.status = 201;
    res.set_content(model_metadata_json(key, *model), "application/json");
  });

  srv.Get(R"(/models/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto model = registry_.get(id);
    if (!model) return send_error(res, 404, "UnknownModel", "no model '" + id + "'");
    res.status = 200;
    res.set_content(model_metadata_json(id, *model), "application/json");
  });

  srv.Post(R"(/models/([^/]+)/evaluate)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto model = registry_.get(id);
    if (!model) return send_error(res, 404, "UnknownModel", "no model '" + id + "'");

    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, "InvalidArgument", std::string("invalid JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("field") || !body["field"].is_string() ||
        !body.contains("parameter")) {
      return send_error(res, 400, "InvalidArgument", "body needs 'field' and 'parameter'");
    }
    const auto field = body["field"].get<std::string>();
    if (!model->find(field)) {
      return send_error(res, 404, "UnknownField", "model '" + id + "' has no field '" + field + "'");
    }

    std::vector<double> coords;
    const auto& jp = body["parameter"];
    if (jp.is_number()) {
      coords.push_back(jp.get<double>());
    } else if (jp.is_array() && std::all_of(jp.begin(), jp.end(), [](const json& v) { return v.is_number(); })) {
      coords = jp.get<std::vector<double>>();
    } else {
      return send_error(res, 400, "InvalidArgument", "'parameter' must be a number or an array of numbers");
    }
    const ParameterPoint<double> pi =
        Eigen::Map<const Vector<double>>(coords.data(), static_cast<Index>(coords.size()));
    if (pi.size() != model->parameter_dim()) {
      return send_error(res, 422, "DimensionMismatch",
                        "parameter has dimension " + std::to_string(pi.size()) + ", model expects " +
                            std::to_string(model->parameter_dim()));
    }
    if (!pi.allFinite()) return send_error(res, 400, "InvalidArgument", "parameter must be finite");
    if (const auto& range = model->declared_range(); range && !range->contains(pi)) {
      return send_error(res, 422, "ParameterOutOfRange", "parameter lies outside the model's declared range",
                        {{"parameter", coords}, {"range", range_json(*range)}});
    }

    long long stride = 0;
    if (body.contains("stride") && !body["stride"].is_null()) {
      if (!body["stride"].is_number_integer() || body["stride"].get<long long>() < 1) {
        return send_error(res, 400, "InvalidArgument", "'stride' must be a positive integer");
      }
      stride = body["stride"].get<long long>();
    }

    const Vector<double> values = evaluate_field(*model, field, pi);
    json out = {{"field", field},
                {"parameter", coords},
                {"n_dof", values.size()},
                {"stats", {{"min", values.minCoeff()}, {"max", values.maxCoeff()}, {"mean", values.mean()}}},
                {"extrapolated", model->is_extrapolated(pi)}};
    if (stride > 0) {
      json strided = json::array();
      for (Index i = 0; i < values.size(); i += stride) strided.push_back(values[i]);
      out["stride"] = stride;
      out["values"] = std::move(strided);
    }
    send_json(res, 200, out);
  });

  const auto curve = config_.curve;
  const json flow_range = {curve.pf_min, curve.pf_max};

  auto pump_error = [flow_range](httplib::Response& res, const Error& e) {
    json extra = {{"range", flow_range}};
    if (e.code() == ErrorCode::FlowOutOfRange && e.value()) extra["pf"] = *e.value();
    send_error(res, status_for(e.code()), to_string(e.code()), e.what(), extra);
  };

  srv.Get("/pump/forward", [curve](const httplib::Request& req, httplib::Response& res) {
    const double omega = query_double(req, "omega");
    const double pf = query_double(req, "pf");
    send_json(res, 200, {{"omega", omega}, {"pf", pf}, {"dp", pump::head_from_speed_flow(curve, omega, pf)}});
  });

  srv.Get("/pump/inverse", [curve, pump_error](const httplib::Request& req, httplib::Response& res) {
    const double omega = query_double(req, "omega");
    const double dp = query_double(req, "dp");
    try {
      const auto point = pump::panel1(curve, dp, omega);
      send_json(res, 200, {{"omega", point.speed}, {"dp", point.head}, {"pf", point.flow}});
    } catch (const Error& e) {
      pump_error(res, e);
    }
  });

  srv.Get("/pump/calibrate", [curve](const httplib::Request& req, httplib::Response& res) {
    const double omega = query_double(req, "omega");
    const double pf = query_double(req, "pf");
    send_json(res, 200, {{"omega", omega}, {"pf", pf}, {"dp", pump::panel2_calibrate(curve, omega, pf)}});
  });

  srv.Get("/pump/curve", [curve](const httplib::Request& req, httplib::Response& res) {
    const double omega = query_double(req, "omega");
    const double n = req.has_param("n") ? query_double(req, "n") : 50.0;
    if (n != std::floor(n) || n < 2 || n > 100000) {
      throw Error(ErrorCode::InvalidArgument, "'n' must be an integer in [2, 100000]");
    }
    json points = json::array();
    for (const auto& s : pump::curve_samples(curve, omega, static_cast<int>(n))) {
      points.push_back({{"pf", s.flow}, {"dp", s.head}});
    }
    send_json(res, 200, {{"omega", omega}, {"range", {curve.pf_min, curve.pf_max}}, {"points", std::move(points)}});
  });
}

}  // namespace podi::service
