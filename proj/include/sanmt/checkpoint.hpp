#pragma once

#include <map>
#include <string>

#include "sanmt/model.hpp"

namespace sanmt {

// Adam first/second moments per parameter plus the update counter.
struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  long step = 0;
};

// Binary container: magic "LSMT", u32 version, length-prefixed JSON
// config, then named f64 tensors (little-endian payload). Loading then
// saving yields a byte-identical file.
struct Checkpoint {
  Model model;
  AdamState opt;
  long step = 0;
  double best_valid_ppl = -1.0;  // -1 when no validation has run
};

void save_checkpoint(const Model& model, const AdamState* opt, long step,
                     double best_valid_ppl, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sanmt
