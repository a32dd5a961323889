#pragma once

#include <cstdint>
#include <filesystem>

namespace chordroll {

/// Settings shared by the pipeline commands. Numeric defaults are the
/// reference training configuration.
struct PipelineConfig {
  std::filesystem::path corpus;            // analyze / build-dataset input
  std::filesystem::path dataset;           // train-* input directory
  std::filesystem::path out = "out";
  std::filesystem::path chord_model_path;  // chord checkpoint (train-poly, generate, export)
  std::filesystem::path poly_model_path;   // polyphonic checkpoint (generate)
  std::filesystem::path seed_song;         // optional MIDI file seeding generation

  int vocab_size = 50;
  int embed_dim = 10;
  int chord_hidden = 256;
  int poly_hidden = 512;
  double chord_lr = 1e-5;
  double poly_lr = 1e-6;
  int epochs = 4;
  int chord_bptt = 64;
  int poly_bptt = 128;
  double temperature = 1.0;
  double note_cap = 4.0;
  std::uint64_t seed = 42;
  int bars = 16;        // progression length to generate
  int tempo_bpm = 120;  // playback tempo written into generated files
  int instrument = 0;   // General MIDI program number
};

/// Echo the effective settings as "key = value" lines ('#' comments), the
/// same format the --config file uses.
void write_effective_config(const std::filesystem::path& path, const PipelineConfig& config);

}  // namespace chordroll
