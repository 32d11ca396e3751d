#ifndef VET_NN_CHECKPOINT_HPP
#define VET_NN_CHECKPOINT_HPP

#include <map>
#include <string>
#include <vector>

#include "vet/nn/adam.hpp"

namespace vet::nn {

struct CheckpointEntry {
    std::vector<std::size_t> shape;
    std::vector<float> data;
};

// Checkpoint file (little-endian):
//   magic "VETW" | version u16=1 | count u32
//   per parameter: name_len u16 | name UTF-8 | rank u8 | extents u32... | payload f32
// Round trip is bit-exact.
void save_checkpoint(const std::string& path,
                     const std::vector<const Parameter<float>*>& params);
std::map<std::string, CheckpointEntry> load_checkpoint(const std::string& path);

// Loads weights into an existing parameter set by name; the names and shapes
// must match exactly.
void apply_checkpoint(const std::map<std::string, CheckpointEntry>& entries,
                      std::vector<Parameter<float>*>& params);

}  // namespace vet::nn

#endif
