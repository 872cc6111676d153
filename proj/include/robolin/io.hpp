#pragma once

// JSON configuration and artifacts. Every artifact is
//   {"schema_version", "kind", "inputs": {name: fingerprint}, "payload", "fingerprint"}
// where "fingerprint" is FNV-1a 64 over the compact dump of "payload".

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "robolin/ahfv_demo.hpp"
#include "robolin/pipeline.hpp"

#include "json.hpp"

namespace robolin::io {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes);
/// 16 lowercase hex digits of fnv1a64.
std::string fingerprint(std::string_view bytes);
std::string fingerprint(const json& j);

class FingerprintMismatch : public Error {
 public:
  using Error::Error;
};

json matrix_to_json(const Eigen::MatrixXd& M);
/// {"rows", "cols", "data" (row major)}; a flat array is read as a diagonal.
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& pointer);

struct RunConfig {
  std::string path;
  std::string fingerprint;  // of the parsed document
  bool ahfv = false;        // builtin AHFV plant
  plant::UncertainPlant plant;
  pipeline::Options options;
  std::optional<sim::Scenario> scenario;
  std::optional<ahfv::DemoConfig> demo;
  std::string coefficients_fingerprint;
};

/// `base_dir` resolves relative file references.
RunConfig parse_config(const json& doc, const std::string& base_dir);
RunConfig load_config(const std::string& path);

json design_model_to_json(const meanval::LinearizedDesignModel& m);
meanval::LinearizedDesignModel design_model_from_json(const json& j);
json certificate_to_json(const minimax::TauCertificate& c);
json controller_to_json(const minimax::Controller& c);
minimax::Controller controller_from_json(const json& j);
json bound_to_json(const meanval::UncertaintyBound& b, const meanval::HyperBox& box);
json verification_to_json(const minimax::VerificationReport& r);
json linearization_to_json(const pipeline::Linearization& l);

json make_artifact(const std::string& kind, const json& inputs, const json& payload);
/// Checks schema version, kind and payload fingerprint; returns the payload.
json open_artifact(const json& artifact, const std::string& kind);

/// Pretty-printed, newline-terminated, written atomically.
void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

}  // namespace robolin::io
