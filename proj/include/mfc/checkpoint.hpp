#ifndef MFC_CHECKPOINT_HPP
#define MFC_CHECKPOINT_HPP

#include "mfc/serialize.hpp"
#include "mfc/training.hpp"

#include <optional>
#include <string>

namespace mfc {

// Byte layout, all integers little-endian:
//   "MFCCKPT\0" | u64 header length | JSON header | u64 weight count | f64 weights
// The header carries the architecture, the basis and the hashes used to
// refuse loading into a mismatched run.
struct CheckpointMeta {
  std::string basis_hash;
  std::string model_hash;   // problem, discretisation and network sections
  std::string config_hash;  // full resolved run configuration
  Json basis;
  Seeds seeds;
  long iteration = 0;
  Real loss = 0.0;
};

struct Checkpoint {
  PolicyNetwork policy;
  CheckpointMeta meta;
};

// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::string& path, const PolicyNetwork& policy,
                     const CheckpointMeta& meta);

Checkpoint load_checkpoint(const std::string& path);

struct CheckpointExpectation {
  std::optional<std::string> basis_hash;
  std::optional<std::string> model_hash;
};

// Throws ConfigError on a hash mismatch unless force is set, in which case
// the mismatch is reported on stderr and the checkpoint is returned.
Checkpoint load_checkpoint(const std::string& path, const CheckpointExpectation& expect,
                           bool force);

}  // namespace mfc

#endif  // MFC_CHECKPOINT_HPP
