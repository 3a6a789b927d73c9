#pragma once

// Text checkpoints. A network is stored as
//
//   network <depth>
//   sizes <in> <h1> ... <out>
//   activations <act_1> ... <act_depth>
//   then per layer: <out> lines of <in> weights (row-major), one bias line
//
// Numbers use the shortest decimal form that parses back to the same double,
// so a round trip is bit-exact. A model checkpoint starts with
//
//   rmnet-model 1
//   kind <ridge|single-head|multi-head>
//   d <d>
//   m <m>
//
// followed by `lambda`/`coef` lines for ridge, the extractor and hypothesis
// networks for single-head, or the extractor, `heads <count>` and each head
// for multi-head.

#include "rmnet/models.hpp"

#include <iosfwd>
#include <string>

namespace rmnet {

void write_model(std::ostream& out, const Model& model);
Model read_model(std::istream& in);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace rmnet
