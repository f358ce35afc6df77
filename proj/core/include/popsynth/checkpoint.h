#ifndef POPSYNTH_CHECKPOINT_H_
#define POPSYNTH_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "popsynth/schema.h"
#include "popsynth/wgan.h"

namespace popsynth {

inline constexpr int kCheckpointVersion = 1;

// Everything needed to sample from a trained generator or to resume
// training bit-identically: config, models, optimizer moments, RNG state,
// minibatch position and the loss log so far.
struct Checkpoint {
  TrainConfig config;
  TrainingState state;
  std::uint64_t schema_fingerprint = 0;
  std::uint64_t data_fingerprint = 0;
  std::size_t n_train_rows = 0;
};

Checkpoint make_checkpoint(const Trainer& trainer, const Schema& schema);

// Versioned JSON; doubles are written with enough digits to round-trip.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
// Throws DataError on malformed input or an unsupported version.
Checkpoint checkpoint_from_json(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds a trainer from a checkpoint and the data it was trained on.
// Throws DataError when the data fingerprint differs.
Trainer resume_training(const Checkpoint& checkpoint, EncodedMatrix data);

// Throws DataError when the checkpoint was trained against another schema.
void check_schema(const Checkpoint& checkpoint, const Schema& schema);

// FNV-1a over the row-major bytes of the matrix and its shape.
std::uint64_t fingerprint(const EncodedMatrix& data);

}  // namespace popsynth

#endif  // POPSYNTH_CHECKPOINT_H_
