#pragma once

#include <string>

#include "gipcnn/graph.hpp"

namespace gipcnn {

// Model files are JSON documents listing nodes in topological order;
// weight data lives in sidecar tensor files referenced by relative path.
// See docs/formats.md for the schema.
ModelGraph load_model(const std::string& path);

// Writes the model JSON and one sidecar tensor file per weight field,
// named <model-stem>.<node-id>.<field>.tensor next to the model.
void save_model(const std::string& path, const ModelGraph& m);

}  // namespace gipcnn
