#pragma once

#include "forest.hpp"
#include "lm.hpp"
#include "rfrk.hpp"
#include "slm.hpp"

#include <string>
#include <variant>

namespace slmrf {

using ModelVariant = std::variant<FittedSLM, LinearModel, ForestModel, RFRKModel>;

// A fitted model plus the pipeline label it came from ("SLM-TF", "RF", ...).
struct SavedModel {
  std::string label;
  ModelVariant model;
};

// JSON document tagged with a schema name and version. Doubles are written
// in shortest round-trip form, so a reloaded model predicts bit-identically.
std::string serialize_model(const SavedModel& model);
// Throws VersionError on an unknown schema or version and on truncated or
// malformed documents.
SavedModel deserialize_model(const std::string& text);

void save_model(const SavedModel& model, const std::string& path);
SavedModel load_model(const std::string& path);

// "slm", "lm", "forest" or "rfrk"
const char* model_kind_tag(const ModelVariant& model);

}  // namespace slmrf
